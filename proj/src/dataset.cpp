#include "setloc/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "setloc/csv.hpp"
#include "setloc/rng.hpp"

namespace setloc {

namespace {

constexpr size_t kMaxReportNotes = 50;

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    size_t pos = 0;
    try {
        out = std::stod(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == s.size();
}

bool parse_int(const std::string& s, int& out) {
    if (s.empty()) return false;
    size_t pos = 0;
    try {
        out = std::stoi(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == s.size();
}

void note(LoadReport& report, size_t line_no, const std::string& why) {
    ++report.rows_quarantined;
    if (report.notes.size() < kMaxReportNotes) {
        report.notes.push_back("line " + std::to_string(line_no) + ": " + why);
    }
}

}  // namespace

std::string canonical_bssid(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        out += char(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

LoadResult load_scans(const std::string& csv_path, const std::string& tag_map_path) {
    csv::Table table = csv::read_file(csv_path);
    for (const char* col : {"scan_id", "building", "floor", "x", "y", "bssid", "rssi"}) {
        if (table.column(col) < 0) {
            throw std::runtime_error("load_scans: missing required column '" +
                                     std::string(col) + "' in " + csv_path);
        }
    }
    std::optional<TagMap> tags;
    if (!tag_map_path.empty()) {
        tags = load_tag_map(tag_map_path);
    }

    const int c_id = table.column("scan_id");
    const int c_building = table.column("building");
    const int c_floor = table.column("floor");
    const int c_x = table.column("x");
    const int c_y = table.column("y");
    const int c_bssid = table.column("bssid");
    const int c_rssi = table.column("rssi");
    const int c_ts = table.column("timestamp");  // optional

    LoadResult result;
    auto& report = result.report;
    std::unordered_map<std::string, size_t> scan_index;  // id -> position in result.scans
    std::set<std::string> quarantined_scan_ids;          // ids that never got a valid row

    size_t line_no = 1;
    for (const auto& row : table.rows) {
        ++line_no;
        ++report.rows_read;
        if (row.size() != table.header.size()) {
            note(report, line_no, "field count mismatch");
            continue;
        }
        const std::string& id = row[c_id];
        if (id.empty()) {
            note(report, line_no, "empty scan_id");
            continue;
        }
        double x = 0, y = 0, rssi = 0;
        int floor = 0;
        if (!parse_double(row[c_x], x) || !parse_double(row[c_y], y)) {
            note(report, line_no, "unparseable position");
            quarantined_scan_ids.insert(id);
            continue;
        }
        if (!parse_int(row[c_floor], floor)) {
            note(report, line_no, "unparseable floor");
            quarantined_scan_ids.insert(id);
            continue;
        }
        if (!parse_double(row[c_rssi], rssi)) {
            note(report, line_no, "unparseable rssi");
            quarantined_scan_ids.insert(id);
            continue;
        }
        if (rssi < -100.0 || rssi > 0.0) {
            note(report, line_no, "rssi " + row[c_rssi] + " outside [-100, 0] dBm");
            quarantined_scan_ids.insert(id);
            continue;
        }
        const std::string bssid = canonical_bssid(row[c_bssid]);
        if (bssid.empty()) {
            note(report, line_no, "empty bssid");
            quarantined_scan_ids.insert(id);
            continue;
        }
        const std::string& building = row[c_building];
        if (tags && !building.empty()) {
            auto it = tags->buildings.find(building);
            if (it == tags->buildings.end()) {
                note(report, line_no, "building '" + building + "' not in tag map");
                quarantined_scan_ids.insert(id);
                continue;
            }
            const auto& floors = it->second.floors;
            if (!floors.empty() &&
                std::find(floors.begin(), floors.end(), floor) == floors.end()) {
                note(report, line_no,
                     "floor " + std::to_string(floor) + " not listed for '" + building + "'");
                quarantined_scan_ids.insert(id);
                continue;
            }
        }

        auto it = scan_index.find(id);
        if (it == scan_index.end()) {
            Scan scan;
            scan.id = id;
            scan.x = x;
            scan.y = y;
            scan.floor = floor;
            if (!building.empty()) scan.building = building;
            if (c_ts >= 0 && !row[c_ts].empty()) scan.timestamp = row[c_ts];
            scan.detections.push_back({bssid, rssi});
            scan_index.emplace(id, result.scans.size());
            result.scans.push_back(std::move(scan));
        } else {
            Scan& scan = result.scans[it->second];
            if (scan.x != x || scan.y != y || scan.floor != floor) {
                note(report, line_no, "position disagrees with earlier rows of scan " + id);
                continue;
            }
            scan.detections.push_back({bssid, rssi});
        }
    }

    for (const auto& id : quarantined_scan_ids) {
        if (!scan_index.count(id)) {
            ++report.scans_quarantined;
        }
    }
    report.scans_loaded = result.scans.size();
    return result;
}

void save_scans(const std::vector<Scan>& scans, const std::string& path) {
    csv::Table table;
    table.header = {"scan_id", "building", "floor", "x", "y", "bssid", "rssi", "timestamp"};
    for (const auto& scan : scans) {
        for (const auto& det : scan.detections) {
            table.rows.push_back({scan.id,
                                  scan.building.value_or(""),
                                  scan.floor ? std::to_string(*scan.floor) : "",
                                  csv::format_double(scan.x),
                                  csv::format_double(scan.y),
                                  det.bssid,
                                  csv::format_double(det.rssi),
                                  scan.timestamp.value_or("")});
        }
    }
    csv::write_file(path, table);
}

void save_scans_wide(const std::vector<Scan>& scans, const std::string& path) {
    std::set<std::string> bssids;
    for (const auto& scan : scans) {
        for (const auto& det : scan.detections) {
            bssids.insert(det.bssid);
        }
    }
    csv::Table table;
    table.header = {"scan_id", "building", "floor", "x", "y"};
    for (const auto& b : bssids) {
        table.header.push_back(b);
    }
    for (const auto& scan : scans) {
        std::vector<std::string> row = {scan.id, scan.building.value_or(""),
                                        scan.floor ? std::to_string(*scan.floor) : "",
                                        csv::format_double(scan.x), csv::format_double(scan.y)};
        std::map<std::string, double> seen;
        for (const auto& det : scan.detections) {
            seen[det.bssid] = det.rssi;  // last detection wins in the flat view
        }
        for (const auto& b : bssids) {
            auto it = seen.find(b);
            row.push_back(csv::format_double(it == seen.end() ? -100.0 : it->second));
        }
        table.rows.push_back(std::move(row));
    }
    csv::write_file(path, table);
}

TagMap load_tag_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_tag_map: cannot open '" + path + "'");
    }
    nlohmann::json j;
    in >> j;
    TagMap tags;
    for (auto it = j.begin(); it != j.end(); ++it) {
        TagMap::BuildingInfo info;
        if (it.value().contains("floors")) {
            for (const auto& f : it.value()["floors"]) {
                info.floors.push_back(f.get<int>());
            }
        }
        if (it.value().contains("area_m2")) {
            info.area_m2 = it.value()["area_m2"].get<double>();
        }
        tags.buildings.emplace(it.key(), std::move(info));
    }
    return tags;
}

void save_tag_map(const TagMap& tags, const std::string& path) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, info] : tags.buildings) {
        j[name] = {{"floors", info.floors}, {"area_m2", info.area_m2}};
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_tag_map: cannot write '" + path + "'");
    }
    out << j.dump(2) << '\n';
}

ExperimentId experiment_from_string(const std::string& s) {
    if (s == "e1" || s == "E1") return ExperimentId::e1;
    if (s == "e2" || s == "E2") return ExperimentId::e2;
    if (s == "e3" || s == "E3") return ExperimentId::e3;
    throw std::invalid_argument("unknown experiment '" + s + "' (expected e1, e2 or e3)");
}

std::string to_string(ExperimentId id) {
    switch (id) {
        case ExperimentId::e1: return "e1";
        case ExperimentId::e2: return "e2";
        case ExperimentId::e3: return "e3";
    }
    return "e1";
}

std::string to_string(ClassField f) {
    switch (f) {
        case ClassField::none: return "none";
        case ClassField::building: return "building";
        case ClassField::floor: return "floor";
    }
    return "none";
}

ClassField class_field_from_string(const std::string& s) {
    if (s == "none") return ClassField::none;
    if (s == "building") return ClassField::building;
    if (s == "floor") return ClassField::floor;
    throw std::invalid_argument("unknown class field '" + s + "'");
}

ExperimentSpec ExperimentSpec::standard(ExperimentId id, uint64_t split_seed, bool multi_task) {
    ExperimentSpec spec;
    spec.id = id;
    spec.split_seed = split_seed;
    spec.multi_task = multi_task;
    switch (id) {
        case ExperimentId::e1:
            spec.class_field = ClassField::none;
            spec.multi_task = false;
            break;
        case ExperimentId::e2:
            spec.floor = 1;
            spec.class_field = ClassField::building;
            break;
        case ExperimentId::e3:
            spec.class_field = ClassField::floor;
            break;
    }
    return spec;
}

std::string class_tag_of(const Scan& scan, ClassField field) {
    switch (field) {
        case ClassField::none: return "";
        case ClassField::building: return scan.building.value_or("");
        case ClassField::floor: return scan.floor ? std::to_string(*scan.floor) : "";
    }
    return "";
}

std::optional<int> class_label_of(const Scan& scan, ClassField field,
                                  const std::vector<std::string>& class_labels) {
    if (field == ClassField::none) return std::nullopt;
    const std::string tag = class_tag_of(scan, field);
    for (size_t i = 0; i < class_labels.size(); ++i) {
        if (class_labels[i] == tag) return int(i);
    }
    return std::nullopt;
}

namespace {

// Resolve unset filter fields against the data so a spec like "E1" alone
// is runnable: pick the largest eligible group deterministically.
ExperimentSpec resolve_filter(const std::vector<Scan>& scans, ExperimentSpec spec) {
    auto count_by = [&scans](auto key_fn) {
        std::map<decltype(key_fn(scans[0])), size_t> counts;
        for (const auto& s : scans) {
            ++counts[key_fn(s)];
        }
        return counts;
    };
    switch (spec.id) {
        case ExperimentId::e1: {
            if (!spec.building || !spec.floor) {
                auto counts = count_by([](const Scan& s) {
                    return std::make_pair(s.building.value_or(""), s.floor.value_or(0));
                });
                size_t best = 0;
                for (const auto& [key, n] : counts) {
                    if (n > best) {
                        best = n;
                        spec.building = key.first;
                        spec.floor = key.second;
                    }
                }
            }
            break;
        }
        case ExperimentId::e2:
            if (!spec.floor) spec.floor = 1;
            break;
        case ExperimentId::e3: {
            if (!spec.building) {
                // Building with >= 2 observed floors and the most scans.
                std::map<std::string, std::set<int>> floors;
                std::map<std::string, size_t> counts;
                for (const auto& s : scans) {
                    const std::string b = s.building.value_or("");
                    floors[b].insert(s.floor.value_or(0));
                    ++counts[b];
                }
                size_t best = 0;
                for (const auto& [b, n] : counts) {
                    if (floors[b].size() >= 2 && n > best) {
                        best = n;
                        spec.building = b;
                    }
                }
                if (!spec.building) {
                    throw std::runtime_error(
                        "assemble_experiment: e3 needs a building with at least two floors");
                }
            }
            break;
        }
    }
    return spec;
}

bool matches_filter(const Scan& scan, const ExperimentSpec& spec) {
    switch (spec.id) {
        case ExperimentId::e1:
            return scan.building.value_or("") == spec.building.value_or("") &&
                   scan.floor.value_or(0) == spec.floor.value_or(0);
        case ExperimentId::e2:
            return scan.floor.value_or(0) == spec.floor.value_or(1);
        case ExperimentId::e3:
            return scan.building.value_or("") == spec.building.value_or("");
    }
    return false;
}

}  // namespace

ExperimentData assemble_experiment(const std::vector<Scan>& scans, const ExperimentSpec& spec_in,
                                   double val_fraction) {
    if (scans.empty()) {
        throw std::invalid_argument("assemble_experiment: no scans");
    }
    if (!(val_fraction > 0.0 && val_fraction < 0.5)) {
        throw std::invalid_argument("assemble_experiment: val_fraction must be in (0, 0.5)");
    }
    ExperimentData data;
    data.spec = resolve_filter(scans, spec_in);

    std::vector<Scan> filtered;
    for (const auto& s : scans) {
        if (matches_filter(s, data.spec)) {
            filtered.push_back(s);
        }
    }
    if (filtered.size() < 50) {
        throw std::runtime_error("assemble_experiment: only " +
                                 std::to_string(filtered.size()) +
                                 " scans match the filter (need >= 50)");
    }

    // Strata: one per class for E2/E3, a single stratum otherwise.
    std::map<std::string, std::vector<size_t>> strata;
    if (data.spec.class_field != ClassField::none) {
        for (size_t i = 0; i < filtered.size(); ++i) {
            strata[class_tag_of(filtered[i], data.spec.class_field)].push_back(i);
        }
        for (const auto& [tag, members] : strata) {
            if (members.size() < 5) {
                throw std::runtime_error("assemble_experiment: class '" + tag + "' has only " +
                                         std::to_string(members.size()) +
                                         " scans; need >= 5 to stratify");
            }
            data.class_labels.push_back(tag);
        }
    } else {
        strata[""].resize(filtered.size());
        for (size_t i = 0; i < filtered.size(); ++i) {
            strata[""][i] = i;
        }
    }

    auto rng = make_rng(derive_seed(data.spec.split_seed, 0x5b11));
    for (auto& [tag, members] : strata) {
        std::shuffle(members.begin(), members.end(), rng);
        // 20% test, then val_fraction of the rest, at least one scan each.
        const size_t n = members.size();
        size_t n_test = std::max<size_t>(1, size_t(double(n) * 0.20 + 0.5));
        size_t n_val = std::max<size_t>(1, size_t(double(n - n_test) * val_fraction + 0.5));
        if (n_test + n_val >= n) {
            throw std::runtime_error("assemble_experiment: class '" + tag +
                                     "' too small for the requested split");
        }
        for (size_t i = 0; i < n; ++i) {
            const Scan& s = filtered[members[i]];
            if (i < n_test) {
                data.test.push_back(s);
            } else if (i < n_test + n_val) {
                data.val.push_back(s);
            } else {
                data.train.push_back(s);
            }
        }
    }
    return data;
}

}  // namespace setloc
