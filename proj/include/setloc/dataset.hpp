#pragma once

// Scan ingestion, tag-map I/O, and experiment assembly (E1/E2/E3 filters
// plus the deterministic stratified train/val/test split).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "setloc/scan.hpp"

namespace setloc {

struct LoadReport {
    size_t rows_read = 0;
    size_t rows_quarantined = 0;
    size_t scans_loaded = 0;
    size_t scans_quarantined = 0;  // scans left with zero valid detections
    std::vector<std::string> notes;  // one line per quarantined row, capped
};

struct LoadResult {
    std::vector<Scan> scans;
    LoadReport report;
};

// Long-format scan CSV: scan_id, building, floor, x, y, bssid, rssi —
// one detection per row. Malformed rows are quarantined and counted, never
// silently dropped. An empty tag_map_path skips tag validation.
LoadResult load_scans(const std::string& csv_path, const std::string& tag_map_path = {});
void save_scans(const std::vector<Scan>& scans, const std::string& path);
// One row per scan, one RSSI column per BSSID, -100 dBm fill.
void save_scans_wide(const std::vector<Scan>& scans, const std::string& path);

TagMap load_tag_map(const std::string& path);
void save_tag_map(const TagMap& tags, const std::string& path);

enum class ExperimentId { e1, e2, e3 };
ExperimentId experiment_from_string(const std::string& s);
std::string to_string(ExperimentId id);

enum class ClassField { none, building, floor };
std::string to_string(ClassField f);
ClassField class_field_from_string(const std::string& s);

struct ExperimentSpec {
    ExperimentId id = ExperimentId::e1;
    // Filter: E1 fixes building+floor, E2 fixes floor (first floors across
    // buildings), E3 fixes building. Unset fields are resolved from the
    // data (largest eligible group, ties broken lexicographically).
    std::optional<std::string> building;
    std::optional<int> floor;
    bool multi_task = false;
    ClassField class_field = ClassField::none;
    uint64_t split_seed = 0;

    static ExperimentSpec standard(ExperimentId id, uint64_t split_seed,
                                   bool multi_task = false);
};

struct ExperimentData {
    ExperimentSpec spec;  // with filter fields resolved
    std::vector<Scan> train;
    std::vector<Scan> val;
    std::vector<Scan> test;
    std::vector<std::string> class_labels;  // index order; empty if class_field none
};

// Deterministic 80/20 train/test split with val carved from train
// (val_fraction of it), stratified by the class field so every class
// appears in every split.
ExperimentData assemble_experiment(const std::vector<Scan>& scans, const ExperimentSpec& spec,
                                   double val_fraction = 0.15);

// Class label of a scan under a spec, as an index into class_labels.
std::optional<int> class_label_of(const Scan& scan, ClassField field,
                                  const std::vector<std::string>& class_labels);
std::string class_tag_of(const Scan& scan, ClassField field);

}  // namespace setloc
