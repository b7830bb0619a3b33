#include "setloc/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "setloc/checkpoint.hpp"
#include "setloc/csv.hpp"
#include "setloc/rng.hpp"
#include "setloc/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace setloc {

namespace {

json spec_to_json(const ExperimentSpec& spec) {
    json j;
    j["id"] = to_string(spec.id);
    if (spec.building) j["building"] = *spec.building;
    if (spec.floor) j["floor"] = *spec.floor;
    j["multi_task"] = spec.multi_task;
    j["class_field"] = to_string(spec.class_field);
    j["split_seed"] = spec.split_seed;
    return j;
}

ExperimentSpec spec_from_json(const json& j) {
    ExperimentSpec spec;
    spec.id = experiment_from_string(j.at("id").get<std::string>());
    if (j.contains("building")) spec.building = j["building"].get<std::string>();
    if (j.contains("floor")) spec.floor = j["floor"].get<int>();
    spec.multi_task = j.value("multi_task", false);
    spec.class_field = class_field_from_string(j.value("class_field", std::string("none")));
    spec.split_seed = j.value("split_seed", uint64_t(0));
    return spec;
}

json model_to_json(const ModelConfig& cfg) {
    json j;
    j["arch"] = to_string(cfg.arch);
    j["embedding_dim"] = cfg.embedding_dim;
    j["hidden"] = cfg.hidden;
    j["sab_blocks"] = cfg.sab_blocks;
    j["heads"] = cfg.heads;
    j["head_hidden"] = cfg.head_hidden;
    j["multi_task"] = cfg.multi_task;
    j["num_classes"] = cfg.num_classes;
    return j;
}

ModelConfig model_from_json(const json& j) {
    ModelConfig cfg;
    cfg.arch = arch_from_string(j.at("arch").get<std::string>());
    ModelConfig defaults = ModelConfig::defaults(cfg.arch);
    cfg.embedding_dim = j.value("embedding_dim", defaults.embedding_dim);
    cfg.hidden = j.value("hidden", defaults.hidden);
    cfg.sab_blocks = j.value("sab_blocks", defaults.sab_blocks);
    cfg.heads = j.value("heads", defaults.heads);
    cfg.head_hidden = j.value("head_hidden", defaults.head_hidden);
    cfg.multi_task = j.value("multi_task", false);
    cfg.num_classes = j.value("num_classes", 0);
    return cfg;
}

json train_to_json(const TrainConfig& cfg) {
    json j;
    j["lr"] = cfg.lr;
    j["epochs"] = cfg.epochs;
    j["accumulation_window"] = cfg.accumulation_window;
    j["early_stop_patience"] = cfg.early_stop_patience;
    j["lambda"] = cfg.lambda;
    j["seed"] = cfg.seed;
    j["val_fraction"] = cfg.val_fraction;
    return j;
}

TrainConfig train_from_json(const json& j) {
    TrainConfig cfg;
    cfg.lr = j.value("lr", cfg.lr);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.accumulation_window = j.value("accumulation_window", cfg.accumulation_window);
    cfg.early_stop_patience = j.value("early_stop_patience", cfg.early_stop_patience);
    cfg.lambda = j.value("lambda", cfg.lambda);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
    return cfg;
}

json data_to_json(const DataSource& data) {
    json j;
    j["kind"] = data.kind == DataSource::Kind::synthetic ? "synthetic" : "file";
    j["n_scans"] = data.n_scans;
    if (!data.path.empty()) j["path"] = data.path;
    if (!data.tag_map.empty()) j["tag_map"] = data.tag_map;
    return j;
}

DataSource data_from_json(const json& j) {
    DataSource data;
    const std::string kind = j.value("kind", std::string("synthetic"));
    if (kind == "synthetic") {
        data.kind = DataSource::Kind::synthetic;
    } else if (kind == "file") {
        data.kind = DataSource::Kind::file;
    } else {
        throw std::invalid_argument("manifest: unknown data kind '" + kind + "'");
    }
    data.n_scans = j.value("n_scans", 600);
    data.path = j.value("path", std::string());
    data.tag_map = j.value("tag_map", std::string());
    return data;
}

}  // namespace

std::string RunManifest::to_json_string() const {
    json j;
    j["experiment"] = spec_to_json(experiment);
    j["model"] = model_to_json(model);
    j["train"] = train_to_json(train);
    j["data"] = data_to_json(data);
    j["output_dir"] = output_dir;
    j["seed"] = seed;
    return j.dump(2);
}

RunManifest RunManifest::from_json_string(const std::string& text) {
    json j = json::parse(text);
    RunManifest m;
    m.experiment = spec_from_json(j.at("experiment"));
    m.model = model_from_json(j.at("model"));
    m.train = train_from_json(j.at("train"));
    m.data = data_from_json(j.at("data"));
    m.output_dir = j.value("output_dir", std::string("runs/out"));
    m.seed = j.value("seed", uint64_t(0));
    return m;
}

RunManifest RunManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("manifest: cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_string(buf.str());
}

void RunManifest::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("manifest: cannot write '" + path + "'");
    }
    out << to_json_string() << '\n';
}

uint64_t RunManifest::data_seed() const { return derive_seed(seed, 0x0da7a); }
uint64_t RunManifest::split_seed() const { return derive_seed(seed, 0x0511); }
uint64_t RunManifest::init_seed() const { return derive_seed(seed, 0x1217); }
uint64_t RunManifest::shuffle_seed() const { return derive_seed(seed, 0x0517); }

ResolvedData resolve_data(const RunManifest& manifest) {
    ResolvedData out;
    if (manifest.data.kind == DataSource::Kind::synthetic) {
        SyntheticDataset ds =
            synth_experiment_dataset(manifest.experiment.id, manifest.data.n_scans,
                                     manifest.data_seed());
        out.scans = std::move(ds.scans);
        out.tags = std::move(ds.tags);
    } else {
        if (manifest.data.path.empty()) {
            throw std::invalid_argument("manifest: file data source needs a path");
        }
        LoadResult loaded = load_scans(manifest.data.path, manifest.data.tag_map);
        out.scans = std::move(loaded.scans);
        if (!manifest.data.tag_map.empty()) {
            out.tags = load_tag_map(manifest.data.tag_map);
        }
    }
    return out;
}

SimulateOutputs run_simulate(const RunManifest& manifest, bool wide_export) {
    if (manifest.data.kind != DataSource::Kind::synthetic) {
        throw std::invalid_argument("simulate: manifest data source must be synthetic");
    }
    fs::create_directories(manifest.output_dir);
    ResolvedData data = resolve_data(manifest);

    SimulateOutputs out;
    out.scans_csv = (fs::path(manifest.output_dir) / "scans.csv").string();
    out.tag_map_json = (fs::path(manifest.output_dir) / "tag_map.json").string();
    out.scan_count = data.scans.size();
    save_scans(data.scans, out.scans_csv);
    save_tag_map(data.tags, out.tag_map_json);
    if (wide_export) {
        save_scans_wide(data.scans, (fs::path(manifest.output_dir) / "scans_wide.csv").string());
    }
    return out;
}

namespace {

ExperimentData assemble_from_manifest(const RunManifest& manifest,
                                      const std::vector<Scan>& scans) {
    ExperimentSpec spec = manifest.experiment;
    spec.split_seed = manifest.split_seed();
    return assemble_experiment(scans, spec, manifest.train.val_fraction);
}

}  // namespace

TrainOutputs run_train(const RunManifest& manifest) {
    fs::create_directories(manifest.output_dir);
    ResolvedData data = resolve_data(manifest);
    ExperimentData split = assemble_from_manifest(manifest, data.scans);

    ModelConfig cfg = manifest.model;
    if (cfg.multi_task || manifest.experiment.multi_task) {
        cfg.multi_task = true;
        cfg.num_classes = int(split.class_labels.size());
    }
    Vocabulary vocab = build_vocabulary(split.train);
    auto model = make_model(cfg, std::move(vocab), manifest.init_seed());
    if (cfg.multi_task) {
        model->set_task_labels(split.spec.class_field, split.class_labels);
    }

    TrainConfig tc = manifest.train;
    tc.seed = manifest.shuffle_seed();
    TrainResult result = train(*model, split, tc);
    Metrics metrics = evaluate(*model, split.test, result.stats);

    // Echo the resolved manifest (filter fields filled in) next to outputs.
    RunManifest resolved = manifest;
    resolved.experiment = split.spec;
    resolved.model = model->config();

    TrainOutputs out;
    const fs::path dir(manifest.output_dir);
    out.checkpoint_path = (dir / "checkpoint.ckpt").string();
    out.history_path = (dir / "history.csv").string();
    out.manifest_path = (dir / "manifest.json").string();
    out.metrics_path = (dir / "metrics.csv").string();
    save_checkpoint(out.checkpoint_path, *model, result.stats, resolved);
    write_history_csv(result.history, out.history_path);
    resolved.save(out.manifest_path);
    write_metrics_csv(out.metrics_path, to_string(split.spec.id), to_string(cfg.arch), metrics);
    out.test_metrics = std::move(metrics);
    out.result = std::move(result);
    return out;
}

EvalOutputs run_eval(const std::string& checkpoint_path, const std::string& data_csv,
                     const std::string& out_dir) {
    LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
    std::vector<Scan> test;
    if (data_csv.empty()) {
        ResolvedData data = resolve_data(loaded.manifest);
        ExperimentData split = assemble_from_manifest(loaded.manifest, data.scans);
        test = std::move(split.test);
    } else {
        test = load_scans(data_csv).scans;
    }

    fs::create_directories(out_dir);
    EvalOutputs out;
    out.metrics = evaluate(*loaded.model, test, loaded.stats);
    out.plot_data_path = (fs::path(out_dir) / "plot_data.csv").string();
    out.metrics_path = (fs::path(out_dir) / "metrics.csv").string();
    export_plot_data(*loaded.model, test, loaded.stats, out.plot_data_path);
    write_metrics_csv(out.metrics_path, to_string(loaded.manifest.experiment.id),
                      to_string(loaded.model->config().arch), out.metrics);
    out.report = to_string(loaded.model->config().arch) + " on " +
                 to_string(loaded.manifest.experiment.id) + ": " + format_error(out.metrics);
    if (out.metrics.class_accuracy) {
        char acc[48];
        std::snprintf(acc, sizeof(acc), ", class accuracy %.3f", *out.metrics.class_accuracy);
        out.report += acc;
    }
    return out;
}

BenchmarkOutputs run_benchmark(const std::string& dir, const std::string& out_dir) {
    std::vector<std::string> checkpoints;
    if (!fs::is_directory(dir)) {
        throw std::runtime_error("benchmark: '" + dir + "' is not a directory");
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ckpt") {
            checkpoints.push_back(entry.path().string());
        } else if (entry.is_directory()) {
            fs::path p = entry.path() / "checkpoint.ckpt";
            if (fs::exists(p)) {
                checkpoints.push_back(p.string());
            } else {
                throw std::runtime_error("benchmark: missing checkpoint in run directory '" +
                                         entry.path().string() + "'");
            }
        }
    }
    std::sort(checkpoints.begin(), checkpoints.end());
    if (checkpoints.size() < 2) {
        throw std::runtime_error("benchmark: need at least 2 checkpoints under '" + dir + "'");
    }

    BenchmarkOutputs out;
    for (const auto& path : checkpoints) {
        LoadedCheckpoint loaded = load_checkpoint(path);
        const std::string exp = to_string(loaded.manifest.experiment.id);
        if (out.experiment.empty()) {
            out.experiment = exp;
        } else if (out.experiment != exp) {
            throw std::runtime_error("benchmark: mixed experiments (" + out.experiment +
                                     " vs " + exp + " in '" + path + "')");
        }
        ResolvedData data = resolve_data(loaded.manifest);
        ExperimentData split = assemble_from_manifest(loaded.manifest, data.scans);
        BenchmarkRow row;
        row.arch = to_string(loaded.model->config().arch);
        row.checkpoint = path;
        row.metrics = evaluate(*loaded.model, split.test, loaded.stats);
        out.rows.push_back(std::move(row));
    }
    std::sort(out.rows.begin(), out.rows.end(),
              [](const BenchmarkRow& a, const BenchmarkRow& b) { return a.arch < b.arch; });

    std::ostringstream table;
    table << "experiment " << out.experiment << ", test error (m)\n";
    csv::Table csv_table;
    csv_table.header = {"experiment", "arch", "mean_error_m", "std_error_m", "class_accuracy"};
    for (const auto& row : out.rows) {
        char line[128];
        std::snprintf(line, sizeof(line), "  %-16s %s\n", row.arch.c_str(),
                      format_error(row.metrics).c_str());
        table << line;
        csv_table.rows.push_back(
            {out.experiment, row.arch, csv::format_double(row.metrics.mean_error_m),
             csv::format_double(row.metrics.std_error_m),
             row.metrics.class_accuracy ? csv::format_double(*row.metrics.class_accuracy)
                                        : ""});
    }
    out.table = table.str();
    fs::create_directories(out_dir);
    out.table_csv_path = (fs::path(out_dir) / "benchmark.csv").string();
    csv::write_file(out.table_csv_path, csv_table);
    return out;
}

}  // namespace setloc
