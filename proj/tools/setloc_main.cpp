// setloc: simulate, train, evaluate and compare RSSI localization models.
//
// Exit codes: 0 success, 2 usage error, 1 runtime failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "setloc/manifest.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 1;

struct CommonFlags {
    std::string manifest_path;
    std::string experiment = "e1";
    std::string arch = "set_transformer";
    std::string data_path;
    std::string tag_map;
    bool synthetic = false;
    std::optional<uint64_t> seed;
    bool multi_task = false;
    std::optional<int> epochs;
    std::optional<double> lr;
    std::optional<int> window;
    std::optional<int> scans;
    std::string out_dir;
};

void add_seed_flag(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--seed", flags.seed, "Master RNG seed")->envname("SETLOC_SEED");
}

bool flag_given(const CLI::App* cmd, const std::string& name) {
    const CLI::Option* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
}

setloc::RunManifest build_manifest(const CommonFlags& flags, const CLI::App* cmd) {
    setloc::RunManifest manifest;
    if (!flags.manifest_path.empty()) {
        manifest = setloc::RunManifest::load(flags.manifest_path);
    } else {
        manifest.experiment = setloc::ExperimentSpec::standard(
            setloc::experiment_from_string(flags.experiment), 0, flags.multi_task);
        manifest.model = setloc::ModelConfig::defaults(setloc::arch_from_string(flags.arch));
    }
    // Flag overrides beat manifest contents.
    if (flag_given(cmd, "--experiment")) {
        manifest.experiment = setloc::ExperimentSpec::standard(
            setloc::experiment_from_string(flags.experiment), 0,
            flags.multi_task || manifest.experiment.multi_task);
    }
    if (flag_given(cmd, "--arch")) {
        manifest.model =
            setloc::ModelConfig::defaults(setloc::arch_from_string(flags.arch));
    }
    if (flags.multi_task) {
        manifest.experiment.multi_task = true;
        manifest.model.multi_task = true;
    }
    if (!flags.data_path.empty()) {
        manifest.data.kind = setloc::DataSource::Kind::file;
        manifest.data.path = flags.data_path;
        manifest.data.tag_map = flags.tag_map;
    } else if (flags.synthetic) {
        manifest.data.kind = setloc::DataSource::Kind::synthetic;
    }
    if (flags.scans) manifest.data.n_scans = *flags.scans;
    if (flags.seed) manifest.seed = *flags.seed;
    if (flags.epochs) manifest.train.epochs = *flags.epochs;
    if (flags.lr) manifest.train.lr = *flags.lr;
    if (flags.window) manifest.train.accumulation_window = *flags.window;
    if (!flags.out_dir.empty()) manifest.output_dir = flags.out_dir;
    manifest.experiment.split_seed = 0;  // derived from master seed at run time
    return manifest;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RSSI indoor localization toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic scan dataset");
    simulate->add_option("--experiment", flags.experiment, "e1, e2 or e3");
    simulate->add_option("--scans", flags.scans, "Number of scans")
        ->check(CLI::PositiveNumber);
    add_seed_flag(simulate, flags);
    simulate->add_option("--out", flags.out_dir, "Output directory");
    bool wide = false;
    simulate->add_flag("--wide", wide, "Also write the flattened wide CSV");

    auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
    train->add_option("--manifest", flags.manifest_path, "Run manifest JSON")
        ->check(CLI::ExistingFile);
    train->add_option("--experiment", flags.experiment, "e1, e2 or e3");
    train->add_option("--arch", flags.arch,
                      "mlp, rnn, lstm, attention or set_transformer");
    train->add_option("--data", flags.data_path, "Scan CSV (long format)")
        ->check(CLI::ExistingFile);
    train->add_option("--tag-map", flags.tag_map, "Tag map JSON")->check(CLI::ExistingFile);
    train->add_flag("--synthetic", flags.synthetic, "Use the built-in synthetic world");
    train->add_option("--scans", flags.scans, "Synthetic scan count")
        ->check(CLI::PositiveNumber);
    add_seed_flag(train, flags);
    train->add_flag("--multi-task", flags.multi_task, "Add the domain classification head");
    train->add_option("--epochs", flags.epochs, "Training epochs")->check(CLI::PositiveNumber);
    train->add_option("--lr", flags.lr, "Learning rate")->check(CLI::PositiveNumber);
    train->add_option("--window", flags.window, "Gradient accumulation window")
        ->check(CLI::PositiveNumber);
    train->add_option("--out", flags.out_dir, "Output directory");

    std::string checkpoint_path;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--data", flags.data_path,
                     "Scan CSV; omit to replay the checkpoint's own test split")
        ->check(CLI::ExistingFile);
    eval->add_option("--out", flags.out_dir, "Output directory");

    std::string bench_dir;
    auto* benchmark = app.add_subcommand("benchmark", "Compare checkpoints of one experiment");
    benchmark->add_option("--dir", bench_dir, "Directory of runs or .ckpt files")
        ->required()
        ->check(CLI::ExistingDirectory);
    benchmark->add_option("--out", flags.out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : kExitUsage;
    }

    try {
        if (simulate->parsed()) {
            setloc::RunManifest manifest = build_manifest(flags, simulate);
            if (flags.out_dir.empty()) manifest.output_dir = "data/synth";
            auto out = setloc::run_simulate(manifest, wide);
            std::cout << "wrote " << out.scan_count << " scans to " << out.scans_csv
                      << " (tag map: " << out.tag_map_json << ")\n";
        } else if (train->parsed()) {
            setloc::RunManifest manifest = build_manifest(flags, train);
            auto out = setloc::run_train(manifest);
            std::cout << "trained " << setloc::to_string(manifest.model.arch) << " on "
                      << setloc::to_string(manifest.experiment.id) << " for "
                      << out.result.epochs_run << " epochs (best epoch "
                      << out.result.best_epoch << ")\n";
            std::cout << "test error: " << setloc::format_error(out.test_metrics) << "\n";
            if (out.test_metrics.class_accuracy) {
                std::cout << "class accuracy: " << *out.test_metrics.class_accuracy << "\n";
            }
            std::cout << "checkpoint: " << out.checkpoint_path << "\n";
        } else if (eval->parsed()) {
            std::string out_dir = flags.out_dir.empty() ? "runs/eval" : flags.out_dir;
            auto out = setloc::run_eval(checkpoint_path, flags.data_path, out_dir);
            std::cout << out.report << "\n";
            std::cout << "plot data: " << out.plot_data_path << "\n";
        } else if (benchmark->parsed()) {
            std::string out_dir = flags.out_dir.empty() ? "runs/benchmark" : flags.out_dir;
            auto out = setloc::run_benchmark(bench_dir, out_dir);
            std::cout << out.table;
            std::cout << "table: " << out.table_csv_path << "\n";
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
