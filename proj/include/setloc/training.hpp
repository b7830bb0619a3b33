#pragma once

// Coordinate normalization, losses, and the optimization loop: per-scan
// forward/backward with gradient accumulation windows, validation-driven
// early stopping, and best-weight retention.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "setloc/autograd.hpp"
#include "setloc/dataset.hpp"
#include "setloc/models.hpp"

namespace setloc {

struct NormStats {
    double mu_x = 0.0;
    double sigma_x = 1.0;
    double mu_y = 0.0;
    double sigma_y = 1.0;

    std::pair<double, double> normalize(double x, double y) const {
        return {(x - mu_x) / sigma_x, (y - mu_y) / sigma_y};
    }
    std::pair<double, double> denormalize(double xn, double yn) const {
        return {xn * sigma_x + mu_x, yn * sigma_y + mu_y};
    }
};

// Population mean/std of training positions. Throws on a degenerate axis.
NormStats fit_norm_stats(const std::vector<Scan>& train);

struct TrainConfig {
    double lr = 1e-3;
    int epochs = 50;
    // Scans per optimizer step; gradients are averaged over the window.
    // 1 reproduces strict per-scan updates, 32 the effective batch size.
    int accumulation_window = 32;
    int early_stop_patience = 10;
    double lambda = 1.0;  // classification loss weight
    uint64_t seed = 0;
    double val_fraction = 0.15;

    void validate() const;
};

// Squared Euclidean residual in normalized coordinates.
ag::Tensor regression_loss(const Prediction& pred, double target_x_norm, double target_y_norm);

// regression + lambda * cross-entropy; class_label must be present exactly
// when the prediction carries logits.
ag::Tensor total_loss(const Prediction& pred, double target_x_norm, double target_y_norm,
                      std::optional<int> class_label, double lambda);

struct EpochStats {
    int epoch = 0;               // 1-based
    double train_loss = 0.0;     // mean per-scan total loss
    double train_reg_loss = 0.0;
    double train_class_loss = 0.0;
    double val_error_m = 0.0;    // mean Euclidean error, meters
};

struct TrainResult {
    std::vector<EpochStats> history;
    NormStats stats;
    double initial_val_error_m = 0.0;  // untrained baseline (epoch 0)
    double best_val_error_m = 0.0;
    int best_epoch = 0;  // 0 means the initial weights were never beaten
    int epochs_run = 0;
};

// Trains in place; on return the model carries the weights of the best
// validation epoch. Scans are processed one by one (variable-length sets,
// no padding); an optimizer step fires every accumulation_window scans.
TrainResult train(Model& model, const ExperimentData& data, const TrainConfig& config);

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path);

}  // namespace setloc
