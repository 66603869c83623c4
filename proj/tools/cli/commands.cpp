#include "cli/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "cli/pairs.hpp"
#include "deepfuse/checkpoint.hpp"
#include "deepfuse/color.hpp"
#include "deepfuse/error.hpp"
#include "deepfuse/exposure.hpp"
#include "deepfuse/fusion.hpp"
#include "deepfuse/image_io.hpp"
#include "deepfuse/log.hpp"
#include "deepfuse/manifest.hpp"
#include "deepfuse/mertens.hpp"
#include "deepfuse/training.hpp"

namespace deepfuse::cli {
namespace {

namespace fs = std::filesystem;

struct SynthArgs {
    std::string input;
    std::uint64_t scene_seed = 0;
    int scene_size = 256;
    double ev_low = -2.0;
    double ev_high = 2.0;
    double gamma = 2.2;
    std::string out_dir;
    std::string tag;
    std::string manifest;
    bool write_target = false;
};

struct TrainArgs {
    std::string data;
    std::string preset = "desk";
    std::string loss = "mefssim";
    std::uint64_t seed = 0;
    std::string out;
    std::string log;
    std::string merge;
    std::string state;
    std::string resume;
    int epochs = 0;
    std::size_t patches = 0;
    int patch_size = 0;
    double lr = 0.0;
    int batch_size = 0;
    int checkpoint_every = 0;
};

struct FuseArgs {
    std::string ckpt;
    std::string under;
    std::string over;
    std::string out;
    std::string merge;
    std::string report;
    int bit_depth = 8;
};

struct ScoreArgs {
    std::string under;
    std::string over;
    std::string fused;
    std::string map;
};

struct CompareArgs {
    std::string data;
    std::string ckpt;
    std::string csv;
    std::string out_dir;
};

void add_config(CLI::App* sub) {
    sub->add_option("--config", "Plain key=value settings; command-line flags take precedence");
}

bool flag_given(const std::vector<std::string>& args, const std::string& flag) {
    for (const std::string& a : args)
        if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
}

// CLI11 only reads config files attached to the root app, so a subcommand's --config is
// expanded here: each key becomes a `--key=value` token placed before the real arguments,
// skipped when the same flag is already on the command line.
std::vector<std::string> expand_config(const CLI::App& app, const std::vector<std::string>& args) {
    if (args.empty()) return args;
    const CLI::App* sub = nullptr;
    try {
        sub = app.get_subcommand(args.front());
    } catch (const CLI::OptionNotFound&) {
        return args;
    }
    std::string path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;

    std::vector<std::string> expanded{args.front()};
    for (const CLI::ConfigItem& item : CLI::ConfigBase().from_file(path)) {
        std::string key = item.name;
        std::replace(key.begin(), key.end(), '_', '-');
        const std::string flag = "--" + key;
        if (!item.parents.empty() || key == "config" || key == "help" ||
            sub->get_option_no_throw(flag) == nullptr) {
            throw ConfigError("config " + path + ": unknown key '" + item.fullname() + "' for " +
                              sub->get_name());
        }
        if (flag_given(args, flag)) continue;
        std::string value;
        for (const std::string& v : item.inputs) value += (value.empty() ? "" : ",") + v;
        expanded.push_back(flag + "=" + value);
    }
    expanded.insert(expanded.end(), args.begin() + 1, args.end());
    return expanded;
}

// Every option's final value, whether it came from a flag, the config file, or a default.
void echo_resolved(const CLI::App* sub) {
    std::ostringstream os;
    os << sub->get_name() << " settings:";
    for (const CLI::Option* opt : sub->get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name == "config") continue;
        std::string value;
        if (opt->count() > 0) {
            for (const std::string& r : opt->results()) value += (value.empty() ? "" : " ") + r;
        } else {
            value = opt->get_default_str();
        }
        os << "\n  " << name << " = " << value;
    }
    log_info(os.str());
}

MergeMode require_merge(const std::string& name) {
    const auto m = parse_merge_mode(name);
    if (!m) throw ConfigError("unknown merge mode '" + name + "' (expected add, mean, max, product, concat)");
    return *m;
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    RgbImage base;
    std::string tag = a.tag;
    if (!a.input.empty()) {
        base = read_image(a.input);
        if (tag.empty()) tag = fs::path(a.input).stem().string();
    } else {
        if (a.scene_size < 8) throw ConfigError("synth: --scene-size must be at least 8");
        base = synthesize_scene(a.scene_size, a.scene_size, a.scene_seed);
        if (tag.empty()) tag = "scene" + std::to_string(a.scene_seed);
    }
    const ExposurePair pair = synthesize_exposure_pair(base, a.ev_low, a.ev_high, a.gamma);

    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    ManifestEntry entry;
    entry.under = dir / (tag + "_under.png");
    entry.over = dir / (tag + "_over.png");
    entry.tag = tag;
    entry.ev_under = pair.ev_under;
    entry.ev_over = pair.ev_over;
    write_image(entry.under, pair.under);
    write_image(entry.over, pair.over);
    if (a.write_target) {
        entry.target = dir / (tag + "_target.png");
        write_image(*entry.target, base);
    }

    const fs::path manifest = a.manifest.empty() ? dir / "manifest.txt" : fs::path(a.manifest);
    const std::string line = format_manifest_line(entry, manifest.parent_path());
    std::ofstream m(manifest, std::ios::app);
    if (!m) throw InputError("cannot append to manifest " + manifest.string());
    m << line << '\n';
    if (!m) throw InputError("write failed for manifest " + manifest.string());
    out << line << '\n';
    return kExitOk;
}

int cmd_train(const TrainArgs& a, const CLI::App* sub, std::ostream& out) {
    auto given = [sub](const char* name) { return sub->get_option(name)->count() > 0; };

    ArchConfig arch;
    TrainConfig config;
    if (a.preset == "desk") {
        arch = ArchConfig::desk();
        config = TrainConfig::desk();
    } else if (a.preset == "paper") {
        arch = ArchConfig::paper();
        config = TrainConfig::paper();
    } else {
        throw ConfigError("unknown preset '" + a.preset + "' (expected desk or paper)");
    }
    const auto loss = parse_loss_kind(a.loss);
    if (!loss) throw ConfigError("unknown loss '" + a.loss + "' (expected mefssim, l1, l2, ssim)");
    config.loss = *loss;
    config.seed = a.seed;
    arch.seed = a.seed;
    if (given("--merge")) {
        arch.merge = require_merge(a.merge);
    }
    if (given("--epochs")) config.epochs = a.epochs;
    if (given("--patches")) config.patches_per_epoch = a.patches;
    if (given("--patch-size")) config.patch_size = a.patch_size;
    if (given("--lr")) config.learning_rate = a.lr;
    if (given("--batch-size")) config.batch_size = a.batch_size;
    if (given("--checkpoint-every")) config.checkpoint_every = a.checkpoint_every;
    const fs::path out_path(a.out);
    config.state_path = a.state.empty() ? fs::path(a.out + ".state") : fs::path(a.state);
    config.best_checkpoint_path = a.out + ".best";
    config.validate(arch);

    const std::vector<ManifestEntry> entries = read_manifest(a.data);
    if (entries.empty()) throw InputError("manifest " + a.data + " lists no pairs");
    if (is_supervised(config.loss)) {
        for (const ManifestEntry& e : entries) {
            if (!e.target) {
                throw ConfigError("loss '" + a.loss + "' is supervised and needs a target image for every pair; '" +
                                  e.tag + "' has none (use --loss mefssim or add a target column)");
            }
        }
    }
    for (const ManifestEntry& e : entries) {
        std::ostringstream os;
        os << "pair " << e.tag << ": " << e.under.string() << " + " << e.over.string();
        if (e.ev_under || e.ev_over) {
            os << " (ev " << (e.ev_under ? std::to_string(*e.ev_under) : "?") << " / "
               << (e.ev_over ? std::to_string(*e.ev_over) : "?") << ")";
        }
        log_info(os.str());
    }
    const std::vector<LumaPair> pairs = load_luma_pairs(entries);
    const std::vector<PatchPair> dataset = build_patch_dataset(pairs, config);

    const fs::path log_path = a.log.empty() ? fs::path(a.out + ".jsonl") : fs::path(a.log);
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw InputError("cannot write log " + log_path.string());
    {
        nlohmann::json header;
        header["preset"] = a.preset;
        header["loss"] = a.loss;
        header["seed"] = a.seed;
        header["merge"] = std::string(to_string(arch.merge));
        header["kernels"] = arch.kernels;
        header["channels"] = arch.channels;
        header["patch_size"] = config.patch_size;
        header["patches_per_epoch"] = config.patches_per_epoch;
        header["epochs"] = config.epochs;
        header["learning_rate"] = config.learning_rate;
        header["batch_size"] = config.batch_size;
        header["pairs"] = entries.size();
        log << nlohmann::json{{"config", header}}.dump() << '\n';
    }
    auto on_epoch = [&](const EpochRecord& r) {
        write_epoch_record(log, r);
        log.flush();
        log_info("epoch " + std::to_string(r.epoch) + "/" + std::to_string(config.epochs) +
                 "  loss " + std::to_string(r.mean_loss) + "  " + std::to_string(r.wall_seconds) + " s");
    };

    TrainingRun run;
    if (!a.resume.empty()) {
        run = load_training_state(a.resume);
        if (run.params.arch != arch)
            throw ConfigError("resume: saved architecture does not match the requested one");
        run = resume_training(config, dataset, std::move(run), on_epoch);
    } else {
        run = train(config, dataset, arch, on_epoch);
    }
    save_checkpoint(run.params, out_path);
    if (run.log.empty()) save_checkpoint(run.best_params, config.best_checkpoint_path);

    const double final_loss = run.log.empty() ? run.initial_loss : run.log.back().mean_loss;
    out << "initial loss: " << std::to_string(run.initial_loss) << '\n'
        << "final loss: " << std::to_string(final_loss) << '\n'
        << "epochs: " << run.epochs_completed << '\n'
        << "checkpoint: " << out_path.string() << '\n';
    return kExitOk;
}

NetworkParams load_for(const std::string& ckpt, const std::string& merge, const CLI::App* sub) {
    NetworkParams params = load_checkpoint(ckpt);
    if (sub->get_option("--merge")->count() > 0) {
        const MergeMode wanted = require_merge(merge);
        if (wanted != params.arch.merge) {
            throw ConfigError("checkpoint " + ckpt + " was trained with merge '" +
                              std::string(to_string(params.arch.merge)) + "', not '" + merge + "'");
        }
    }
    return params;
}

int cmd_fuse(const FuseArgs& a, const CLI::App* sub, std::ostream& out) {
    const NetworkParams params = load_for(a.ckpt, a.merge, sub);
    const ExposurePair pair = load_exposure_pair(a.under, a.over);
    FusionOptions options;
    options.image_id = fs::path(a.out).stem().string();
    const FusionResult fused = fuse_pair(params, pair, options);
    write_image(a.out, fused.fused, a.bit_depth);

    // Score the file as written so the number matches `deepfuse score` on the same triple.
    const MefSsimResult score = score_files(a.under, a.over, a.out, options.metric, false);
    out << format_score(score);
    if (!a.report.empty()) {
        FusionReport report = fused.report;
        report.score = score.score;
        report.scale_scores = score.scale_scores;
        std::ofstream r(a.report, std::ios::app);
        if (!r) throw InputError("cannot write report " + a.report);
        r << to_json(report) << '\n';
    }
    return kExitOk;
}

int cmd_score(const ScoreArgs& a, std::ostream& out) {
    const MefSsimResult r = score_files(a.under, a.over, a.fused, MefSsimConfig{}, !a.map.empty());
    out << format_score(r);
    if (!a.map.empty()) write_image(a.map, clamp01(r.map), 16);
    return kExitOk;
}

int cmd_compare(const CompareArgs& a, std::ostream& out) {
    const NetworkParams params = load_checkpoint(a.ckpt);
    const std::vector<ManifestEntry> entries = read_manifest(a.data);
    if (!a.out_dir.empty()) fs::create_directories(a.out_dir);

    std::vector<CompareRow> rows;
    for (const ManifestEntry& e : entries) {
        const ExposurePair pair = load_exposure_pair(e.under, e.over);
        const PlanarImage yu = luminance(pair.under);
        const PlanarImage yo = luminance(pair.over);
        const std::vector<RgbImage> stack{pair.under, pair.over};
        const RgbImage mertens = mertens_fuse(stack);
        FusionOptions options;
        options.image_id = e.tag;
        const FusionResult df = fuse_pair(params, pair, options);
        CompareRow row;
        row.sequence = e.tag;
        row.mertens = mef_ssim(yu, yo, luminance(mertens)).score;
        row.deepfuse = df.report.score;
        rows.push_back(row);
        if (!a.out_dir.empty()) {
            write_image(fs::path(a.out_dir) / (e.tag + "_mertens.png"), mertens);
            write_image(fs::path(a.out_dir) / (e.tag + "_deepfuse.png"), df.fused);
        }
    }

    out << compare_markdown(rows);
    const fs::path data(a.data);
    const fs::path csv = a.csv.empty() ? data.parent_path() / (data.stem().string() + ".compare.csv")
                                       : fs::path(a.csv);
    std::ofstream c(csv, std::ios::trunc);
    if (!c) throw InputError("cannot write " + csv.string());
    c << compare_csv(rows);
    if (!c) throw InputError("write failed for " + csv.string());
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    ScopedLogSink sink([&err](LogLevel level, std::string_view msg) {
        err << (level == LogLevel::Warning ? "warning: " : "") << msg << '\n';
    });

    CLI::App app{"DeepFuse exposure fusion toolkit"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    SynthArgs synth;
    CLI::App* s = app.add_subcommand("synth", "Make an under/over exposure pair and a manifest line");
    add_config(s);
    s->add_option("--input", synth.input, "Base image (PNG/PPM/PGM); omit to render a procedural scene");
    s->add_option("--scene-seed", synth.scene_seed, "Seed of the procedural scene");
    s->add_option("--scene-size", synth.scene_size, "Side length of the procedural scene");
    s->add_option("--ev-low", synth.ev_low, "Exposure shift of the under-exposed image (stops)");
    s->add_option("--ev-high", synth.ev_high, "Exposure shift of the over-exposed image (stops)");
    s->add_option("--gamma", synth.gamma, "Display gamma of the base image")->check(CLI::PositiveNumber);
    s->add_option("--out-dir", synth.out_dir, "Output directory")->required();
    s->add_option("--tag", synth.tag, "Sequence name (defaults to the input stem)");
    s->add_option("--manifest", synth.manifest, "Manifest to append to (default <out-dir>/manifest.txt)");
    s->add_flag("--target", synth.write_target, "Also write the base image as a supervised target");

    TrainArgs train_args;
    CLI::App* t = app.add_subcommand("train", "Train the fusion network on a manifest of pairs");
    add_config(t);
    t->add_option("--data", train_args.data, "Manifest of training pairs")->required();
    t->add_option("--preset", train_args.preset, "desk or paper");
    t->add_option("--loss", train_args.loss, "mefssim, l1, l2 or ssim");
    t->add_option("--seed", train_args.seed, "Seed for initialization, cropping and shuffling");
    t->add_option("--out", train_args.out, "Checkpoint path")->required();
    t->add_option("--log", train_args.log, "Epoch log (default <out>.jsonl)");
    t->add_option("--merge", train_args.merge, "Feature merge: add, mean, max, product, concat");
    t->add_option("--epochs", train_args.epochs, "Override the preset epoch count");
    t->add_option("--patches", train_args.patches, "Override patches per epoch");
    t->add_option("--patch-size", train_args.patch_size, "Override the patch side length");
    t->add_option("--lr", train_args.lr, "Override the learning rate");
    t->add_option("--batch-size", train_args.batch_size, "Override the mini-batch size");
    t->add_option("--checkpoint-every", train_args.checkpoint_every, "Save training state every N epochs");
    t->add_option("--state", train_args.state, "Training state path (default <out>.state)");
    t->add_option("--resume", train_args.resume, "Continue from a saved training state");

    FuseArgs fuse_args;
    CLI::App* f = app.add_subcommand("fuse", "Fuse an exposure pair with a trained checkpoint");
    add_config(f);
    f->add_option("--ckpt", fuse_args.ckpt, "Checkpoint")->required();
    f->add_option("--under", fuse_args.under, "Under-exposed image")->required();
    f->add_option("--over", fuse_args.over, "Over-exposed image")->required();
    f->add_option("--out", fuse_args.out, "Fused output image")->required();
    f->add_option("--merge", fuse_args.merge, "Expected merge mode of the checkpoint");
    f->add_option("--bit-depth", fuse_args.bit_depth, "8 or 16")->check(CLI::IsMember({8, 16}));
    f->add_option("--report", fuse_args.report, "Append a JSON report line to this file");

    ScoreArgs score_args;
    CLI::App* sc = app.add_subcommand("score", "MEF-SSIM of a fused image against its exposures");
    add_config(sc);
    sc->add_option("--under", score_args.under, "Under-exposed image")->required();
    sc->add_option("--over", score_args.over, "Over-exposed image")->required();
    sc->add_option("--fused", score_args.fused, "Fused image")->required();
    sc->add_option("--map", score_args.map, "Write the per-pixel score map (16-bit grey)");

    CompareArgs compare_args;
    CLI::App* c = app.add_subcommand("compare", "Mertens vs DeepFuse MEF-SSIM table over a manifest");
    add_config(c);
    c->add_option("--data", compare_args.data, "Manifest of test pairs")->required();
    c->add_option("--ckpt", compare_args.ckpt, "Checkpoint")->required();
    c->add_option("--csv", compare_args.csv, "CSV output (default <manifest>.compare.csv)");
    c->add_option("--out-dir", compare_args.out_dir, "Also save both fused images per sequence");

    try {
        const std::vector<std::string> expanded = expand_config(app, args);
        std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        for (CLI::App* sub : app.get_subcommands()) echo_resolved(sub);
        if (s->parsed()) return cmd_synth(synth, out);
        if (t->parsed()) return cmd_train(train_args, t, out);
        if (f->parsed()) return cmd_fuse(fuse_args, f, out);
        if (sc->parsed()) return cmd_score(score_args, out);
        if (c->parsed()) return cmd_compare(compare_args, out);
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const CheckpointError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace deepfuse::cli
