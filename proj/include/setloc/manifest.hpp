#pragma once

// A RunManifest pins everything a run needs — experiment, model, training
// config, data source, seed — so identical manifests give identical
// metrics. The run_* functions are the library-level entry points the CLI
// wraps.

#include <cstdint>
#include <optional>
#include <string>

#include "setloc/dataset.hpp"
#include "setloc/evaluation.hpp"
#include "setloc/models.hpp"
#include "setloc/training.hpp"

namespace setloc {

struct DataSource {
    enum class Kind { synthetic, file };
    Kind kind = Kind::synthetic;
    int n_scans = 600;       // synthetic only
    std::string path;        // file only: long-format scan CSV
    std::string tag_map;     // optional tag map JSON
};

struct RunManifest {
    ExperimentSpec experiment;
    ModelConfig model;
    TrainConfig train;
    DataSource data;
    std::string output_dir = "runs/out";
    uint64_t seed = 0;

    std::string to_json_string() const;
    static RunManifest from_json_string(const std::string& text);
    static RunManifest load(const std::string& path);
    void save(const std::string& path) const;

    // Derived stream seeds, all functions of the master seed.
    uint64_t data_seed() const;
    uint64_t split_seed() const;
    uint64_t init_seed() const;
    uint64_t shuffle_seed() const;
};

// Resolves the manifest's data source into scans (generating or loading).
struct ResolvedData {
    std::vector<Scan> scans;
    TagMap tags;
};
ResolvedData resolve_data(const RunManifest& manifest);

struct SimulateOutputs {
    std::string scans_csv;
    std::string tag_map_json;
    size_t scan_count = 0;
};
SimulateOutputs run_simulate(const RunManifest& manifest, bool wide_export = false);

struct TrainOutputs {
    std::string checkpoint_path;
    std::string history_path;
    std::string manifest_path;
    std::string metrics_path;
    Metrics test_metrics;
    TrainResult result;
};
TrainOutputs run_train(const RunManifest& manifest);

struct EvalOutputs {
    Metrics metrics;
    std::string report;       // printable "mean ± std (m)" line
    std::string plot_data_path;
    std::string metrics_path;
};
// data_csv empty: rebuild the checkpoint manifest's dataset and use its
// test split. Otherwise evaluate on every scan in the given file.
EvalOutputs run_eval(const std::string& checkpoint_path, const std::string& data_csv,
                     const std::string& out_dir);

struct BenchmarkRow {
    std::string arch;
    std::string checkpoint;
    Metrics metrics;
};
struct BenchmarkOutputs {
    std::string experiment;
    std::vector<BenchmarkRow> rows;
    std::string table;  // printable comparison
    std::string table_csv_path;
};
// Evaluates every checkpoint found under dir (one per run subdirectory or
// *.ckpt at the top level); all must belong to the same experiment.
BenchmarkOutputs run_benchmark(const std::string& dir, const std::string& out_dir);

}  // namespace setloc
