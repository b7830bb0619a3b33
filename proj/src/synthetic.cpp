#include "setloc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "setloc/rng.hpp"

namespace setloc {

void SynthWorld::validate() const {
    if (aps.empty()) {
        throw std::invalid_argument("SynthWorld: no access points");
    }
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("SynthWorld: extent must be positive");
    }
    if (path_loss_exponent <= 0) {
        throw std::invalid_argument("SynthWorld: path-loss exponent must be positive");
    }
    if (detect_threshold_dbm <= -100.0) {
        throw std::invalid_argument("SynthWorld: detect threshold must exceed -100 dBm");
    }
    if (floors.empty()) {
        throw std::invalid_argument("SynthWorld: no floors");
    }
    for (const auto& ap : aps) {
        if (ap.x < 0 || ap.x > width || ap.y < 0 || ap.y > height) {
            throw std::invalid_argument("SynthWorld: AP '" + ap.bssid + "' outside extent");
        }
    }
}

double expected_rssi(const SynthWorld& world, const SynthWorld::Ap& ap, double x, double y,
                     int floor) {
    const double dx = x - ap.x;
    const double dy = y - ap.y;
    const double dist = std::max(std::sqrt(dx * dx + dy * dy), 1.0);
    const double floors_apart = std::abs(floor - ap.floor);
    return world.tx_power_dbm - 10.0 * world.path_loss_exponent * std::log10(dist) -
           world.floor_attenuation_db * floors_apart;
}

namespace {

std::string synth_bssid(int building_idx, int floor, int ap_idx) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "02:53:4c:%02x:%02x:%02x", building_idx & 0xff, floor & 0xff,
                  ap_idx & 0xff);
    return buf;
}

void add_ap_grid(SynthWorld& world, int building_idx, int floor, int count,
                 std::mt19937_64& rng) {
    // Jittered grid covering the extent.
    const int grid_cols = int(std::ceil(std::sqrt(double(count) * world.width / world.height)));
    const int grid_rows = int(std::ceil(double(count) / grid_cols));
    std::uniform_real_distribution<double> jitter(-2.0, 2.0);
    int placed = 0;
    for (int r = 0; r < grid_rows && placed < count; ++r) {
        for (int c = 0; c < grid_cols && placed < count; ++c) {
            SynthWorld::Ap ap;
            ap.x = std::clamp((c + 0.5) * world.width / grid_cols + jitter(rng), 0.0,
                              world.width);
            ap.y = std::clamp((r + 0.5) * world.height / grid_rows + jitter(rng), 0.0,
                              world.height);
            ap.floor = floor;
            ap.bssid = synth_bssid(building_idx, floor, placed);
            world.aps.push_back(std::move(ap));
            ++placed;
        }
    }
}

}  // namespace

std::vector<Scan> generate_synthetic(const SynthWorld& world, int n_scans, uint64_t seed) {
    world.validate();
    if (n_scans < 1) {
        throw std::invalid_argument("generate_synthetic: n_scans must be >= 1");
    }
    std::vector<Scan> scans;
    scans.reserve(n_scans);
    for (int i = 0; i < n_scans; ++i) {
        auto rng = make_rng(derive_seed(seed, uint64_t(i)));
        std::uniform_real_distribution<double> ux(0.0, world.width);
        std::uniform_real_distribution<double> uy(0.0, world.height);
        std::uniform_int_distribution<size_t> ufloor(0, world.floors.size() - 1);
        std::normal_distribution<double> noise(0.0, world.noise_sigma_db);

        Scan scan;
        // Resample position until at least one AP is detected.
        for (int attempt = 0; attempt < 1000; ++attempt) {
            scan.detections.clear();
            scan.x = ux(rng);
            scan.y = uy(rng);
            const int floor = world.floors[ufloor(rng)];
            scan.floor = floor;
            for (const auto& ap : world.aps) {
                double r = expected_rssi(world, ap, scan.x, scan.y, floor);
                if (world.noise_sigma_db > 0.0) {
                    r += noise(rng);
                }
                if (r >= world.detect_threshold_dbm) {
                    scan.detections.push_back({ap.bssid, std::clamp(r, -100.0, 0.0)});
                }
            }
            if (world.max_detections > 0 &&
                int(scan.detections.size()) > world.max_detections) {
                // Device cap: keep the strongest entries, then restore the
                // original AP order so the stored scan stays unordered.
                std::stable_sort(scan.detections.begin(), scan.detections.end(),
                                 [](const Detection& a, const Detection& b) {
                                     return a.rssi > b.rssi;
                                 });
                scan.detections.resize(size_t(world.max_detections));
                std::stable_sort(scan.detections.begin(), scan.detections.end(),
                                 [](const Detection& a, const Detection& b) {
                                     return a.bssid < b.bssid;
                                 });
            }
            if (!scan.detections.empty()) break;
        }
        if (scan.detections.empty()) {
            throw std::runtime_error(
                "generate_synthetic: could not produce a detectable position; "
                "check threshold and AP coverage");
        }
        char id[32];
        std::snprintf(id, sizeof(id), "s%06d", i);
        scan.id = id;
        scan.building = world.building;
        scans.push_back(std::move(scan));
    }
    return scans;
}

SynthWorld default_e1_world(uint64_t seed) {
    SynthWorld world;
    world.building = "hall_a";
    auto rng = make_rng(derive_seed(seed, 0xa11));
    add_ap_grid(world, 0, 1, 20, rng);
    return world;
}

std::vector<SynthWorld> default_e2_worlds(uint64_t seed) {
    std::vector<SynthWorld> worlds;
    const char* names[] = {"hall_a", "hall_b", "hall_c"};
    for (int b = 0; b < 3; ++b) {
        SynthWorld world;
        world.building = names[b];
        auto rng = make_rng(derive_seed(seed, 0xb00 + uint64_t(b)));
        add_ap_grid(world, b, 1, 20, rng);
        worlds.push_back(std::move(world));
    }
    return worlds;
}

SynthWorld default_e3_world(uint64_t seed) {
    SynthWorld world;
    world.building = "hall_a";
    world.floors = {1, 2, 3};
    for (int f = 1; f <= 3; ++f) {
        auto rng = make_rng(derive_seed(seed, 0xc00 + uint64_t(f)));
        add_ap_grid(world, 0, f, 20, rng);
    }
    return world;
}

SyntheticDataset synth_experiment_dataset(ExperimentId id, int n_scans, uint64_t seed) {
    SyntheticDataset out;
    switch (id) {
        case ExperimentId::e1: {
            SynthWorld world = default_e1_world(seed);
            out.scans = generate_synthetic(world, n_scans, derive_seed(seed, 0xd1));
            out.tags.buildings[world.building] = {{1}, world.width * world.height};
            break;
        }
        case ExperimentId::e2: {
            // Buildings sit 150 m apart on the x axis with disjoint AP sets.
            auto worlds = default_e2_worlds(seed);
            const int per = std::max(1, n_scans / int(worlds.size()));
            for (size_t b = 0; b < worlds.size(); ++b) {
                const int count =
                    (b + 1 == worlds.size()) ? n_scans - per * int(worlds.size() - 1) : per;
                auto scans = generate_synthetic(worlds[b], count,
                                                derive_seed(seed, 0xd2 + uint64_t(b)));
                const double offset = 150.0 * double(b);
                for (auto& s : scans) {
                    s.x += offset;
                    s.id = worlds[b].building + "_" + s.id;
                    out.scans.push_back(std::move(s));
                }
                out.tags.buildings[worlds[b].building] = {
                    {1}, worlds[b].width * worlds[b].height};
            }
            break;
        }
        case ExperimentId::e3: {
            SynthWorld world = default_e3_world(seed);
            out.scans = generate_synthetic(world, n_scans, derive_seed(seed, 0xd3));
            out.tags.buildings[world.building] = {world.floors,
                                                  world.width * world.height * 3};
            break;
        }
    }
    return out;
}

}  // namespace setloc
