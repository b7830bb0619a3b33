#pragma once

// Self-describing model container: little-endian binary file of
// length-prefixed named entries (JSON metadata blob + one float64 array
// per parameter). Layout details in docs/checkpoint-format.md.

#include <memory>
#include <string>

#include "setloc/manifest.hpp"
#include "setloc/models.hpp"
#include "setloc/training.hpp"

namespace setloc {

void save_checkpoint(const std::string& path, const Model& model, const NormStats& stats,
                     const RunManifest& manifest);

struct LoadedCheckpoint {
    std::unique_ptr<Model> model;
    NormStats stats;
    RunManifest manifest;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace setloc
