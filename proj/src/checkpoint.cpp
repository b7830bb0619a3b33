#include "setloc/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace setloc {

namespace {

constexpr char kMagic[4] = {'S', 'L', 'O', 'C'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kKindArray = 0;
constexpr uint8_t kKindBlob = 1;

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<char*>(&v), 8); }

uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void write_name(std::ostream& out, const std::string& name) {
    write_u32(out, uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
}

std::string read_name(std::istream& in) {
    const uint32_t len = read_u32(in);
    if (len > 4096) {
        throw std::runtime_error("checkpoint: implausible name length");
    }
    std::string name(len, '\0');
    in.read(name.data(), len);
    return name;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const NormStats& stats,
                     const RunManifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_checkpoint: cannot write '" + path + "'");
    }

    nlohmann::json meta;
    meta["arch"] = to_string(model.config().arch);
    meta["embedding_dim"] = model.config().embedding_dim;
    meta["hidden"] = model.config().hidden;
    meta["sab_blocks"] = model.config().sab_blocks;
    meta["heads"] = model.config().heads;
    meta["head_hidden"] = model.config().head_hidden;
    meta["multi_task"] = model.config().multi_task;
    meta["num_classes"] = model.config().num_classes;
    meta["init_seed"] = model.init_seed();
    meta["fallback_seed"] = model.fallback_seed();
    meta["vocabulary"] = model.vocabulary().bssids();
    meta["class_field"] = to_string(model.class_field());
    meta["class_labels"] = model.class_labels();
    meta["norm_stats"] = {{"mu_x", stats.mu_x},
                          {"sigma_x", stats.sigma_x},
                          {"mu_y", stats.mu_y},
                          {"sigma_y", stats.sigma_y}};
    meta["manifest"] = nlohmann::json::parse(manifest.to_json_string());
    const std::string meta_text = meta.dump();

    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, uint32_t(model.parameters().size() + 1));

    write_name(out, "meta");
    out.put(char(kKindBlob));
    write_u64(out, meta_text.size());
    out.write(meta_text.data(), std::streamsize(meta_text.size()));

    for (const auto& p : model.parameters()) {
        if (p.name().empty()) {
            throw std::runtime_error("save_checkpoint: unnamed parameter");
        }
        write_name(out, p.name());
        out.put(char(kKindArray));
        write_u32(out, uint32_t(p.rows()));
        write_u32(out, uint32_t(p.cols()));
        out.write(reinterpret_cast<const char*>(p.values().data()),
                  std::streamsize(p.numel() * sizeof(double)));
    }
    if (!out) {
        throw std::runtime_error("save_checkpoint: write to '" + path + "' failed");
    }
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
    }
    char magic[4] = {};
    in.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("load_checkpoint: '" + path + "' is not a checkpoint file");
    }
    if (read_u32(in) != kVersion) {
        throw std::runtime_error("load_checkpoint: unsupported version");
    }
    const uint32_t entries = read_u32(in);

    std::string meta_text;
    struct ArrayEntry {
        uint32_t rows = 0, cols = 0;
        std::vector<double> values;
    };
    std::map<std::string, ArrayEntry> arrays;
    for (uint32_t i = 0; i < entries; ++i) {
        const std::string name = read_name(in);
        const int kind = in.get();
        if (kind == kKindBlob) {
            const uint64_t len = read_u64(in);
            std::string text(len, '\0');
            in.read(text.data(), std::streamsize(len));
            if (name == "meta") meta_text = std::move(text);
        } else if (kind == kKindArray) {
            ArrayEntry e;
            e.rows = read_u32(in);
            e.cols = read_u32(in);
            e.values.resize(size_t(e.rows) * e.cols);
            in.read(reinterpret_cast<char*>(e.values.data()),
                    std::streamsize(e.values.size() * sizeof(double)));
            arrays.emplace(name, std::move(e));
        } else {
            throw std::runtime_error("load_checkpoint: corrupt entry kind");
        }
        if (!in) {
            throw std::runtime_error("load_checkpoint: truncated file '" + path + "'");
        }
    }
    if (meta_text.empty()) {
        throw std::runtime_error("load_checkpoint: missing meta entry");
    }

    nlohmann::json meta = nlohmann::json::parse(meta_text);
    ModelConfig cfg;
    cfg.arch = arch_from_string(meta.at("arch").get<std::string>());
    cfg.embedding_dim = meta.at("embedding_dim").get<int>();
    cfg.hidden = meta.at("hidden").get<int>();
    cfg.sab_blocks = meta.at("sab_blocks").get<int>();
    cfg.heads = meta.at("heads").get<int>();
    cfg.head_hidden = meta.at("head_hidden").get<int>();
    cfg.multi_task = meta.at("multi_task").get<bool>();
    cfg.num_classes = meta.at("num_classes").get<int>();

    Vocabulary vocab(meta.at("vocabulary").get<std::vector<std::string>>());

    LoadedCheckpoint loaded;
    loaded.model = make_model(cfg, std::move(vocab), meta.at("init_seed").get<uint64_t>());
    loaded.model->set_task_labels(
        class_field_from_string(meta.at("class_field").get<std::string>()),
        meta.at("class_labels").get<std::vector<std::string>>());

    for (auto& p : loaded.model->parameters()) {
        auto it = arrays.find(p.name());
        if (it == arrays.end()) {
            throw std::runtime_error("load_checkpoint: checkpoint/arch mismatch, missing '" +
                                     p.name() + "'");
        }
        if (int(it->second.rows) != p.rows() || int(it->second.cols) != p.cols()) {
            throw std::runtime_error("load_checkpoint: shape mismatch for '" + p.name() + "'");
        }
        p.values_mut() = std::move(it->second.values);
        arrays.erase(it);
    }
    if (!arrays.empty()) {
        throw std::runtime_error("load_checkpoint: checkpoint/arch mismatch, extra entry '" +
                                 arrays.begin()->first + "'");
    }

    const auto& ns = meta.at("norm_stats");
    loaded.stats.mu_x = ns.at("mu_x").get<double>();
    loaded.stats.sigma_x = ns.at("sigma_x").get<double>();
    loaded.stats.mu_y = ns.at("mu_y").get<double>();
    loaded.stats.sigma_y = ns.at("sigma_y").get<double>();

    loaded.manifest = RunManifest::from_json_string(meta.at("manifest").dump());
    return loaded;
}

}  // namespace setloc
