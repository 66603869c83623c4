#include "deepfuse/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "deepfuse/color.hpp"
#include "deepfuse/error.hpp"

namespace deepfuse {
namespace {

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
    auto* what = static_cast<std::string*>(png_get_error_ptr(png));
    if (what) *what = msg;
    png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

RgbImage read_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw InputError("cannot open image " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw InputError(path.string() + " is not a PNG file");

    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("libpng initialization failed");
    }
    RgbImage out;
    std::vector<png_byte> buffer;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("PNG decode failed for " + path.string() + ": " + message);
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (depth == 16) png_set_swap(png);  // little-endian samples in memory
    png_read_update_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int out_depth = png_get_bit_depth(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    buffer.resize(stride * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    out = RgbImage(static_cast<int>(height), static_cast<int>(width));
    const std::size_t samples = out.data.size();
    if (out_depth == 16) {
        for (std::size_t i = 0; i < samples; ++i) {
            const std::uint16_t v = static_cast<std::uint16_t>(buffer[2 * i] | (buffer[2 * i + 1] << 8));
            out.data[i] = v / 65535.0;
        }
    } else {
        for (std::size_t i = 0; i < samples; ++i) out.data[i] = buffer[i] / 255.0;
    }
    return out;
}

void write_png(const std::filesystem::path& path, const std::vector<double>& samples, int height,
               int width, int channels, int bit_depth) {
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw InputError("cannot write image " + path.string());
    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw InputError("libpng initialization failed");
    }
    const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
    const std::size_t stride = static_cast<std::size_t>(width) * channels * bytes_per_sample;
    std::vector<png_byte> buffer(stride * height);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double v = std::clamp(samples[i], 0.0, 1.0);
        if (bit_depth == 16) {
            const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
            buffer[2 * i] = static_cast<png_byte>(q >> 8);  // PNG stores big-endian
            buffer[2 * i + 1] = static_cast<png_byte>(q & 0xff);
        } else {
            buffer[i] = static_cast<png_byte>(std::lround(v * 255.0));
        }
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) rows[y] = buffer.data() + static_cast<std::size_t>(y) * stride;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw InputError("PNG encode failed for " + path.string() + ": " + message);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
    std::string token;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string ignored;
            std::getline(in, ignored);
            if (!token.empty()) break;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!token.empty()) break;
            continue;
        }
        token.push_back(c);
    }
    return token;
}

RgbImage read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open image " + path.string());
    const std::string magic = pnm_token(in);
    if (magic != "P5" && magic != "P6")
        throw InputError(path.string() + ": only binary PGM (P5) and PPM (P6) are supported");
    int width = 0, height = 0, maxval = 0;
    try {
        width = std::stoi(pnm_token(in));
        height = std::stoi(pnm_token(in));
        maxval = std::stoi(pnm_token(in));  // consumes exactly one whitespace byte after
    } catch (const std::exception&) {
        throw InputError(path.string() + ": malformed PNM header");
    }
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535)
        throw InputError(path.string() + ": invalid PNM dimensions or maxval");
    const int channels = magic == "P6" ? 3 : 1;
    const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    std::vector<unsigned char> raw(count * bytes_per_sample);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw InputError(path.string() + ": truncated PNM payload");

    RgbImage out(height, width);
    for (std::size_t p = 0; p < out.pixel_count(); ++p) {
        for (int c = 0; c < 3; ++c) {
            const std::size_t s = p * channels + (channels == 3 ? c : 0);
            const double v = bytes_per_sample == 2 ? ((raw[2 * s] << 8) | raw[2 * s + 1]) : raw[s];
            out.data[p * 3 + c] = v / maxval;
        }
    }
    return out;
}

void write_pnm(const std::filesystem::path& path, const std::vector<double>& samples, int height,
               int width, int channels, int bit_depth) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write image " + path.string());
    const int maxval = bit_depth == 16 ? 65535 : 255;
    out << (channels == 3 ? "P6" : "P5") << '\n' << width << ' ' << height << '\n' << maxval << '\n';
    std::vector<unsigned char> raw;
    raw.reserve(samples.size() * (bit_depth == 16 ? 2 : 1));
    for (double v : samples) {
        const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
        if (bit_depth == 16) raw.push_back(static_cast<unsigned char>(q >> 8));
        raw.push_back(static_cast<unsigned char>(q & 0xff));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw InputError("write failed for " + path.string());
}

void check_depth(int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw ConfigError("write_image: bit depth must be 8 or 16");
}

}  // namespace

RgbImage read_image(const std::filesystem::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".png") return read_png(path);
    if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return read_pnm(path);
    throw InputError("unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const RgbImage& image, int bit_depth) {
    check_depth(bit_depth);
    const std::string ext = lower_extension(path);
    if (ext == ".png") return write_png(path, image.data, image.height, image.width, 3, bit_depth);
    if (ext == ".ppm" || ext == ".pnm") return write_pnm(path, image.data, image.height, image.width, 3, bit_depth);
    if (ext == ".pgm") {
        const PlanarImage y = luminance(image);
        return write_pnm(path, y.pixels, y.height, y.width, 1, bit_depth);
    }
    throw InputError("unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const PlanarImage& gray, int bit_depth) {
    check_depth(bit_depth);
    const std::string ext = lower_extension(path);
    if (ext == ".png") return write_png(path, gray.pixels, gray.height, gray.width, 1, bit_depth);
    if (ext == ".pgm" || ext == ".pnm") return write_pnm(path, gray.pixels, gray.height, gray.width, 1, bit_depth);
    if (ext == ".ppm") {
        RgbImage rgb(gray.height, gray.width);
        for (int c = 0; c < 3; ++c) rgb.set_channel(c, gray);
        return write_pnm(path, rgb.data, rgb.height, rgb.width, 3, bit_depth);
    }
    throw InputError("unsupported image format: " + path.string());
}

}  // namespace deepfuse
