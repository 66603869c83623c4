#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cli/commands.hpp"
#include "cli/pairs.hpp"
#include "deepfuse/checkpoint.hpp"
#include "deepfuse/color.hpp"
#include "deepfuse/image_io.hpp"
#include "deepfuse/manifest.hpp"
#include "deepfuse/network.hpp"
#include "support/fixtures.hpp"

using namespace deepfuse;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

Outcome invoke(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    Outcome o;
    o.code = cli::run(args, out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

// Exit status of the installed binary, stdout and stderr discarded.
int external(const std::string& args) {
    const std::string cmd = std::string("\"") + DEEPFUSE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Scratch directory holding two synthetic 64x64 pairs and an untrained checkpoint.
struct Workspace {
    fixtures::TempDir dir{"deepfuse-cli"};
    fs::path manifest = dir / "pairs" / "manifest.txt";
    fs::path ckpt = dir / "init.ckpt";

    Workspace() {
        for (const char* seed : {"1", "2"})
            REQUIRE(invoke({"synth", "--scene-seed", seed, "--scene-size", "64", "--out-dir", (dir / "pairs").string()}).code == 0);
        save_checkpoint(init_network(ArchConfig::desk()), ckpt);
    }
    std::string path(const std::string& leaf) const { return (dir / leaf).string(); }
    std::string pair(const std::string& leaf) const { return (dir / "pairs" / leaf).string(); }
};

double parse_score(const std::string& text) {
    const auto at = text.find("score: ");
    REQUIRE(at != std::string::npos);
    return std::stod(text.substr(at + 7));
}

std::vector<std::string> train_args(const Workspace& w, const std::string& out, const std::string& seed) {
    return {"train", "--data", w.manifest.string(), "--out", w.path(out), "--seed", seed,
            "--patches", "16", "--epochs", "2", "--patch-size", "32"};
}

}  // namespace

TEST_SUITE("cli_usage") {
    TEST_CASE("help exits 0, usage errors exit 2") {
        CHECK(invoke({"--help"}).code == cli::kExitOk);
        CHECK(invoke({"fuse", "--help"}).code == cli::kExitOk);
        CHECK(invoke({}).code == cli::kExitUsage);
        CHECK(invoke({"frobnicate"}).code == cli::kExitUsage);
        CHECK(invoke({"score", "--under", "a.png"}).code == cli::kExitUsage);
        CHECK(invoke({"fuse", "--ckpt", "c", "--under", "u", "--over", "o", "--out", "f.png", "--bit-depth", "12"}).code ==
              cli::kExitUsage);
    }

    TEST_CASE("the built binary reports the same exit codes") {
        Workspace w;
        CHECK(external("--help") == 0);
        CHECK(external("score --under missing.png --over missing.png --fused missing.png") == 2);
        const std::string u = w.pair("scene1_under.png");
        CHECK(external("score --under " + u + " --over " + u + " --fused " + u) == 0);
    }
}

TEST_SUITE("cli_synth") {
    TEST_CASE("a base image gives two exposures and a manifest line") {
        fixtures::TempDir dir("deepfuse-synth");
        write_image(dir / "base.png", synthesize_scene(40, 48, 3));
        const Outcome o = invoke({"synth", "--input", (dir / "base.png").string(), "--out-dir", (dir / "out").string()});
        REQUIRE(o.code == 0);
        CHECK(fs::exists(dir / "out" / "base_under.png"));
        CHECK(fs::exists(dir / "out" / "base_over.png"));
        const auto entries = read_manifest(dir / "out" / "manifest.txt");
        REQUIRE(entries.size() == 1);
        CHECK(entries[0].tag == "base");
        CHECK(entries[0].under == dir / "out" / "base_under.png");
        CHECK(o.out.find("base_under.png, base_over.png, base") == 0);
    }

    TEST_CASE("zero EV on both sides reproduces the input") {
        fixtures::TempDir dir("deepfuse-synth");
        write_image(dir / "base.png", synthesize_scene(32, 32, 4));
        REQUIRE(invoke({"synth", "--input", (dir / "base.png").string(), "--ev-low", "0", "--ev-high", "0", "--out-dir",
                     dir.path.string(), "--tag", "flat"})
                    .code == 0);
        const RgbImage base = read_image(dir / "base.png");
        CHECK(read_image(dir / "flat_under.png") == base);
        CHECK(read_image(dir / "flat_over.png") == base);
    }

    TEST_CASE("manifest EV fields reach the training loader") {
        fixtures::TempDir dir("deepfuse-synth");
        REQUIRE(invoke({"synth", "--scene-seed", "7", "--scene-size", "64", "--ev-low", "-1.5", "--ev-high", "2.5",
                     "--out-dir", dir.path.string()})
                    .code == 0);
        const auto entries = read_manifest(dir / "manifest.txt");
        REQUIRE(entries.size() == 1);
        CHECK(entries[0].ev_under == -1.5);
        CHECK(entries[0].ev_over == 2.5);
        const Outcome t = invoke({"train", "--data", (dir / "manifest.txt").string(), "--out", (dir / "m.ckpt").string(),
                               "--patches", "4", "--epochs", "1", "--patch-size", "32"});
        CHECK(t.code == 0);
        CHECK(t.err.find("(ev -1.500000 / 2.500000)") != std::string::npos);
    }

    TEST_CASE("unreadable input exits 2") {
        fixtures::TempDir dir("deepfuse-synth");
        const Outcome o = invoke({"synth", "--input", (dir / "nope.png").string(), "--out-dir", dir.path.string()});
        CHECK(o.code == cli::kExitUsage);
        CHECK(o.err.find("nope.png") != std::string::npos);
        CHECK(invoke({"synth", "--ev-low", "2", "--ev-high", "-2", "--out-dir", dir.path.string()}).code == cli::kExitUsage);
    }
}

TEST_SUITE("cli_train") {
    TEST_CASE("writes a checkpoint and a JSON-lines log") {
        Workspace w;
        const Outcome o = invoke(train_args(w, "a.ckpt", "5"));
        REQUIRE(o.code == 0);
        CHECK(o.out.find("epochs: 2") != std::string::npos);
        ArchConfig expected = ArchConfig::desk();
        expected.seed = 5;
        CHECK(load_checkpoint(w.dir / "a.ckpt").arch == expected);
        std::ifstream log(w.dir / "a.ckpt.jsonl");
        std::string line;
        int lines = 0;
        while (std::getline(log, line)) ++lines;
        CHECK(lines == 3);
    }

    TEST_CASE("a fixed seed reproduces the checkpoint byte for byte") {
        Workspace w;
        REQUIRE(invoke(train_args(w, "a.ckpt", "5")).code == 0);
        REQUIRE(invoke(train_args(w, "b.ckpt", "5")).code == 0);
        REQUIRE(invoke(train_args(w, "c.ckpt", "6")).code == 0);
        CHECK(slurp(w.dir / "a.ckpt") == slurp(w.dir / "b.ckpt"));
        CHECK(slurp(w.dir / "a.ckpt") != slurp(w.dir / "c.ckpt"));
    }

    TEST_CASE("a supervised loss without targets exits 2 and says why") {
        Workspace w;
        auto args = train_args(w, "a.ckpt", "5");
        args.insert(args.end(), {"--loss", "l1"});
        const Outcome o = invoke(args);
        CHECK(o.code == cli::kExitUsage);
        CHECK(o.err.find("needs a target image") != std::string::npos);
        CHECK_FALSE(fs::exists(w.dir / "a.ckpt"));
    }

    TEST_CASE("supervised training runs when targets are listed") {
        fixtures::TempDir dir("deepfuse-train");
        REQUIRE(invoke({"synth", "--scene-seed", "3", "--scene-size", "64", "--target", "--out-dir", dir.path.string()})
                    .code == 0);
        const Outcome o = invoke({"train", "--data", (dir / "manifest.txt").string(), "--out", (dir / "s.ckpt").string(),
                               "--loss", "l2", "--patches", "8", "--epochs", "1", "--patch-size", "32"});
        CHECK(o.code == 0);
    }

    TEST_CASE("bad manifests and settings exit 2") {
        Workspace w;
        {
            std::ofstream(w.dir / "bad.txt") << "only_one_field.png\n";
            std::ofstream(w.dir / "empty.txt") << "# nothing\n";
        }
        CHECK(invoke({"train", "--data", w.path("bad.txt"), "--out", w.path("x.ckpt")}).code == cli::kExitUsage);
        CHECK(invoke({"train", "--data", w.path("empty.txt"), "--out", w.path("x.ckpt")}).code == cli::kExitUsage);
        CHECK(invoke({"train", "--data", w.path("missing.txt"), "--out", w.path("x.ckpt")}).code == cli::kExitUsage);
        auto args = train_args(w, "x.ckpt", "1");
        args.insert(args.end(), {"--preset", "huge"});
        CHECK(invoke(args).code == cli::kExitUsage);
        args = train_args(w, "x.ckpt", "1");
        args.insert(args.end(), {"--lr", "-1"});
        CHECK(invoke(args).code == cli::kExitUsage);
    }

    TEST_CASE("a diverging run exits 3 and names the step") {
        Workspace w;
        auto args = train_args(w, "x.ckpt", "1");
        args.insert(args.end(), {"--lr", "1e300"});
        const Outcome o = invoke(args);
        CHECK(o.code == cli::kExitNumeric);
        CHECK(o.err.find("step") != std::string::npos);
    }
}

TEST_SUITE("cli_fuse_score") {
    TEST_CASE("fuse prints the same score as score on the written file") {
        Workspace w;
        const std::string u = w.pair("scene1_under.png"), o = w.pair("scene1_over.png");
        for (const char* depth : {"8", "16"}) {
            const std::string out = w.path(std::string("f") + depth + ".png");
            const Outcome f = invoke({"fuse", "--ckpt", w.ckpt.string(), "--under", u, "--over", o, "--out", out,
                                   "--bit-depth", depth, "--report", w.path("r.jsonl")});
            REQUIRE(f.code == 0);
            const Outcome s = invoke({"score", "--under", u, "--over", o, "--fused", out});
            REQUIRE(s.code == 0);
            CHECK(f.out == s.out);
        }
        CHECK(slurp(w.dir / "r.jsonl").find("\"image_id\":\"f8\"") != std::string::npos);
    }

    TEST_CASE("twin inputs keep their chroma") {
        Workspace w;
        const std::string u = w.pair("scene2_under.png");
        REQUIRE(invoke({"fuse", "--ckpt", w.ckpt.string(), "--under", u, "--over", u, "--out", w.path("t.png"),
                     "--bit-depth", "16"})
                    .code == 0);
        const YCbCrImage in = rgb_to_ycbcr(read_image(u));
        const RgbImage fused = read_image(w.dir / "t.png");
        const YCbCrImage out = rgb_to_ycbcr(fused);
        // Pixels clipped in RGB lose their chroma; everywhere else it must survive (16-bit steps).
        std::size_t unclipped = 0;
        double worst = 0.0;
        for (std::size_t i = 0; i < fused.pixel_count(); ++i) {
            const double* px = &fused.data[3 * i];
            if (std::min({px[0], px[1], px[2]}) <= 0.0 || std::max({px[0], px[1], px[2]}) >= 1.0) continue;
            ++unclipped;
            worst = std::max({worst, std::abs(out.cb.pixels[i] - in.cb.pixels[i]),
                              std::abs(out.cr.pixels[i] - in.cr.pixels[i])});
        }
        CHECK(unclipped > fused.pixel_count() / 2);
        CHECK(worst < 0.05);
    }

    TEST_CASE("a merge that disagrees with the checkpoint exits 2") {
        Workspace w;
        const std::string u = w.pair("scene1_under.png"), o = w.pair("scene1_over.png");
        const std::vector<std::string> base{"fuse", "--ckpt", w.ckpt.string(), "--under", u, "--over", o, "--out",
                                            w.path("f.png")};
        auto add = base;
        add.insert(add.end(), {"--merge", "add"});
        CHECK(invoke(add).code == 0);
        auto product = base;
        product.insert(product.end(), {"--merge", "product"});
        const Outcome bad = invoke(product);
        CHECK(bad.code == cli::kExitUsage);
        CHECK(bad.err.find("merge 'add'") != std::string::npos);
        {
            std::ofstream(w.dir / "junk.ckpt") << "junk";
        }
        auto junk = base;
        junk[2] = w.path("junk.ckpt");
        CHECK(invoke(junk).code == cli::kExitUsage);
    }

    TEST_CASE("score of an image against itself is 1") {
        Workspace w;
        const std::string u = w.pair("scene1_under.png");
        const Outcome s = invoke({"score", "--under", u, "--over", u, "--fused", u});
        REQUIRE(s.code == 0);
        CHECK(s.out.find("score: 1.000000\n") == 0);
        CHECK(parse_score(s.out) == 1.0);
        CHECK(s.out.find("scale 3: 1.000000") != std::string::npos);
    }

    TEST_CASE("score map has the input dimensions") {
        Workspace w;
        const std::string u = w.pair("scene1_under.png"), o = w.pair("scene1_over.png");
        REQUIRE(invoke({"score", "--under", u, "--over", o, "--fused", u, "--map", w.path("map.png")}).code == 0);
        const RgbImage map = read_image(w.dir / "map.png");
        CHECK(map.height == 64);
        CHECK(map.width == 64);
    }

    TEST_CASE("mismatched dimensions exit 2") {
        Workspace w;
        write_image(w.dir / "small.png", fixtures::random_rgb(64, 60, 1));
        const std::string u = w.pair("scene1_under.png"), o = w.pair("scene1_over.png");
        CHECK(invoke({"score", "--under", u, "--over", o, "--fused", w.path("small.png")}).code == cli::kExitUsage);
        CHECK(invoke({"score", "--under", u, "--over", w.path("small.png"), "--fused", u}).code == cli::kExitUsage);
        CHECK(invoke({"fuse", "--ckpt", w.ckpt.string(), "--under", u, "--over", w.path("small.png"), "--out",
                   w.path("f.png")})
                  .code == cli::kExitUsage);
    }
}

TEST_SUITE("cli_compare") {
    TEST_CASE("an empty manifest gives a header-only table") {
        Workspace w;
        {
            std::ofstream(w.dir / "none.txt") << "# no pairs\n";
        }
        const Outcome o = invoke({"compare", "--data", w.path("none.txt"), "--ckpt", w.ckpt.string()});
        CHECK(o.code == 0);
        CHECK(o.out == "| Sequence | Mertens | DF |\n|---|---|---|\n");
        CHECK(slurp(w.dir / "none.compare.csv") == "sequence,mertens,deepfuse\n");
    }

    TEST_CASE("one row per sequence plus the mean, with a CSV alongside") {
        Workspace w;
        const Outcome o = invoke({"compare", "--data", w.manifest.string(), "--ckpt", w.ckpt.string(), "--out-dir",
                               w.path("fused")});
        REQUIRE(o.code == 0);
        CHECK(o.out.find("| scene1 | ") != std::string::npos);
        CHECK(o.out.find("| scene2 | ") != std::string::npos);
        CHECK(o.out.find("| Mean | ") != std::string::npos);
        CHECK(fs::exists(w.dir / "fused" / "scene1_mertens.png"));
        CHECK(fs::exists(w.dir / "fused" / "scene2_deepfuse.png"));

        std::istringstream csv(slurp(w.dir / "pairs" / "manifest.compare.csv"));
        std::string line;
        std::vector<std::string> lines;
        while (std::getline(csv, line)) lines.push_back(line);
        REQUIRE(lines.size() == 4);
        CHECK(lines[0] == "sequence,mertens,deepfuse");
        CHECK(lines[3].rfind("mean,", 0) == 0);
        // Four decimals, '.' separator.
        CHECK(lines[1].size() == std::string("scene1,0.0000,0.0000").size());
    }

    TEST_CASE("Mertens and DeepFuse rows are scored like the score command") {
        Workspace w;
        REQUIRE(invoke({"compare", "--data", w.manifest.string(), "--ckpt", w.ckpt.string(), "--out-dir",
                     w.path("fused")})
                    .code == 0);
        const std::string u = w.pair("scene1_under.png"), o = w.pair("scene1_over.png");
        const Outcome s = invoke({"score", "--under", u, "--over", o, "--fused", w.path("fused/scene1_mertens.png")});
        REQUIRE(s.code == 0);
        std::istringstream csv(slurp(w.dir / "pairs" / "manifest.compare.csv"));
        std::string header, row;
        std::getline(csv, header);
        std::getline(csv, row);
        const double mertens = std::stod(row.substr(row.find(',') + 1));
        // The table scores the unquantized fusion, the file is 8-bit.
        CHECK(mertens == doctest::Approx(parse_score(s.out)).epsilon(5e-3));
    }

    TEST_CASE("bold marks the larger score, both on a tie") {
        const std::string md = cli::compare_markdown({{"a", 0.91, 0.95}, {"b", 0.97, 0.93}, {"c", 0.90004, 0.90001}});
        CHECK(md.find("| a | 0.9100 | **0.9500** |") != std::string::npos);
        CHECK(md.find("| b | **0.9700** | 0.9300 |") != std::string::npos);
        CHECK(md.find("| c | **0.9000** | **0.9000** |") != std::string::npos);
        CHECK(md.find("| Mean | **0.9267** | **0.9267** |") != std::string::npos);
    }

    TEST_CASE("mean row is the arithmetic mean") {
        std::vector<cli::CompareRow> rows;
        const std::vector<double> m = fixtures::uniform(7, 0.5, 1.0, 3);
        const std::vector<double> d = fixtures::uniform(7, 0.5, 1.0, 4);
        double sm = 0.0, sd = 0.0;
        for (int i = 0; i < 7; ++i) {
            rows.push_back({"s" + std::to_string(i), m[i], d[i]});
            sm += m[i];
            sd += d[i];
        }
        const cli::CompareRow mean = cli::mean_row(rows);
        CHECK(std::abs(mean.mertens - sm / 7.0) < 1e-9);
        CHECK(std::abs(mean.deepfuse - sd / 7.0) < 1e-9);
        CHECK(cli::compare_csv(rows).find("\nmean,") != std::string::npos);
    }
}

TEST_SUITE("cli_config") {
    TEST_CASE("flag beats config file beats default, and every value is echoed") {
        fixtures::TempDir dir("deepfuse-config");
        {
            std::ofstream(dir / "synth.cfg") << "# synth settings\nscene-size = 48\nev_low = -1\nev-high = 3\n";
        }
        const Outcome o = invoke({"synth", "--config", (dir / "synth.cfg").string(), "--ev-high", "1", "--scene-seed",
                               "9", "--out-dir", dir.path.string()});
        REQUIRE(o.code == 0);
        CHECK(o.err.find("scene-size = 48") != std::string::npos);
        CHECK(o.err.find("ev-low = -1") != std::string::npos);
        CHECK(o.err.find("ev-high = 1") != std::string::npos);
        CHECK(o.err.find("gamma = 2.2") != std::string::npos);
        CHECK(read_image(dir / "scene9_under.png").height == 48);
        const auto entries = read_manifest(dir / "manifest.txt");
        CHECK(entries.at(0).ev_under == -1.0);
        CHECK(entries.at(0).ev_over == 1.0);
    }

    TEST_CASE("required options may come from the config file") {
        fixtures::TempDir dir("deepfuse-config");
        {
            std::ofstream(dir / "c.cfg") << "out-dir = " << (dir / "from_cfg").string() << "\nscene-size = 32\n";
        }
        CHECK(invoke({"synth", "--config", (dir / "c.cfg").string()}).code == 0);
        CHECK(fs::exists(dir / "from_cfg" / "scene0_under.png"));
    }

    TEST_CASE("unknown keys and missing files are rejected") {
        fixtures::TempDir dir("deepfuse-config");
        {
            std::ofstream(dir / "bad.cfg") << "scene-size = 32\nlearning-rate = 0.1\n";
        }
        const Outcome o = invoke({"synth", "--config", (dir / "bad.cfg").string(), "--out-dir", dir.path.string()});
        CHECK(o.code == cli::kExitUsage);
        CHECK(o.err.find("learning-rate") != std::string::npos);
        CHECK_FALSE(fs::exists(dir / "manifest.txt"));
        CHECK(invoke({"synth", "--config", (dir / "none.cfg").string(), "--out-dir", dir.path.string()}).code ==
              cli::kExitUsage);
    }
}
