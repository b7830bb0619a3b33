#pragma once

// Log-distance path-loss simulator. Produces labeled scans at desk scale
// for the three experiment shapes, with per-scan RNG streams so generation
// is reproducible and order-independent.

#include <cstdint>
#include <string>
#include <vector>

#include "setloc/dataset.hpp"
#include "setloc/scan.hpp"

namespace setloc {

struct SynthWorld {
    struct Ap {
        double x = 0.0;
        double y = 0.0;
        int floor = 1;
        std::string bssid;
    };

    std::string building = "hall_a";
    double width = 50.0;   // meters
    double height = 30.0;  // meters
    std::vector<int> floors = {1};
    std::vector<Ap> aps;

    // Defaults put the detection boundary near 23 m so scan cardinality
    // varies naturally across a 50x30 m floor.
    double tx_power_dbm = -40.0;       // received power at 1 m
    double path_loss_exponent = 3.5;   // n in the log-distance model
    double noise_sigma_db = 4.0;       // shadowing noise
    double detect_threshold_dbm = -88.0;
    double floor_attenuation_db = 15.0;
    // Scanning devices report a bounded list; only the strongest
    // max_detections survive (0 disables the cap).
    int max_detections = 10;

    void validate() const;
};

// Noise-free received power at (x, y, floor) from one AP; distance is
// clamped at 1 m to avoid the log singularity.
double expected_rssi(const SynthWorld& world, const SynthWorld::Ap& ap, double x, double y,
                     int floor);

std::vector<Scan> generate_synthetic(const SynthWorld& world, int n_scans, uint64_t seed);

// Default desk-scale worlds echoing the per-floor scan counts of a small
// campus dataset: 50x30 m floors, 20 APs on a jittered grid per floor.
SynthWorld default_e1_world(uint64_t seed);
std::vector<SynthWorld> default_e2_worlds(uint64_t seed);  // 3 buildings, 150 m apart
SynthWorld default_e3_world(uint64_t seed);                // 1 building, 3 floors

struct SyntheticDataset {
    std::vector<Scan> scans;
    TagMap tags;
};

SyntheticDataset synth_experiment_dataset(ExperimentId id, int n_scans, uint64_t seed);

}  // namespace setloc
