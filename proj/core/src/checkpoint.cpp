#include "deepfuse/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "deepfuse/error.hpp"

namespace deepfuse {
namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'D', 'F', 'N', 'C'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t offset) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
    return v;
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t offset = 0;
    while (offset < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
        crc = crc32(crc, bytes.data() + offset, chunk);
        offset += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const NetworkParams& params) {
    const std::vector<double> values = params.flatten();
    std::vector<std::uint8_t> out;
    out.reserve(kCheckpointHeaderBytes + 4 * values.size() + kCheckpointTrailerBytes);
    for (std::uint8_t b : kMagic) out.push_back(b);
    put_u32(out, kCheckpointVersion);
    for (int k : params.arch.kernels) put_u32(out, static_cast<std::uint32_t>(k));
    for (int c : params.arch.channels) put_u32(out, static_cast<std::uint32_t>(c));
    put_u32(out, static_cast<std::uint32_t>(params.arch.merge));
    put_u64(out, params.arch.seed);
    put_u64(out, values.size());
    for (double v : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    put_u32(out, crc32_of(out));
    return out;
}

NetworkParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
    using Kind = CheckpointError::Kind;
    if (bytes.size() < 8) throw CheckpointError(Kind::Truncated, "checkpoint: file too short for a header");
    if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
        throw CheckpointError(Kind::BadMagic, "checkpoint: not a DeepFuse checkpoint");
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kCheckpointVersion) {
        throw CheckpointError(Kind::VersionMismatch,
                              "checkpoint: format version " + std::to_string(version) +
                                  ", expected " + std::to_string(kCheckpointVersion));
    }
    if (bytes.size() < kCheckpointHeaderBytes)
        throw CheckpointError(Kind::Truncated, "checkpoint: header is truncated");

    ArchConfig arch;
    for (int i = 0; i < 5; ++i) arch.kernels[i] = static_cast<int>(get_u32(bytes, 8 + 4 * i));
    for (int i = 0; i < 4; ++i) arch.channels[i] = static_cast<int>(get_u32(bytes, 28 + 4 * i));
    const std::uint32_t merge = get_u32(bytes, 44);
    if (merge > static_cast<std::uint32_t>(MergeMode::Concat))
        throw CheckpointError(Kind::Malformed, "checkpoint: unknown merge mode");
    arch.merge = static_cast<MergeMode>(merge);
    arch.seed = get_u64(bytes, 48);
    const std::uint64_t count = get_u64(bytes, 56);

    // Payload and trailer are covered by the checksum, so a short or padded body
    // surfaces as a checksum failure rather than a partial model.
    const std::uint64_t expected = kCheckpointHeaderBytes + 4 * count + kCheckpointTrailerBytes;
    if (count > (bytes.size() / 4) || bytes.size() != expected) {
        throw CheckpointError(Kind::ChecksumMismatch,
                              "checkpoint: checksum failure (file is " + std::to_string(bytes.size()) +
                                  " bytes, header implies " + std::to_string(expected) + ")");
    }
    const std::size_t body = bytes.size() - kCheckpointTrailerBytes;
    if (crc32_of(bytes.first(body)) != get_u32(bytes, body))
        throw CheckpointError(Kind::ChecksumMismatch, "checkpoint: checksum failure");

    NetworkParams params;
    try {
        params = init_network(arch);
    } catch (const ConfigError& e) {
        throw CheckpointError(Kind::Malformed, std::string("checkpoint: invalid architecture: ") + e.what());
    }
    if (params.parameter_count() != count)
        throw CheckpointError(Kind::Malformed, "checkpoint: parameter count does not match architecture");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        values[i] = static_cast<double>(
            std::bit_cast<float>(get_u32(bytes, kCheckpointHeaderBytes + 4 * i)));
    }
    params.assign(values);
    return params;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            out.close();
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw CheckpointError(CheckpointError::Kind::Io, "write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw CheckpointError(CheckpointError::Kind::Io, "cannot move checkpoint into " + path.string());
    }
}

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
    write_file_bytes_atomic(path, encode_checkpoint(params));
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file_bytes(path));
}

}  // namespace deepfuse
