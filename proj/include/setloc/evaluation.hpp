#pragma once

// Meter-space error metrics, classification accuracy for multi-task runs,
// and plot-data export for prediction-vs-truth figures.

#include <optional>
#include <string>
#include <vector>

#include "setloc/models.hpp"
#include "setloc/training.hpp"

namespace setloc {

struct Metrics {
    double mean_error_m = 0.0;
    double std_error_m = 0.0;  // population standard deviation
    std::vector<double> per_scan_errors;
    std::optional<double> class_accuracy;
};

double euclidean_error(double pred_x, double pred_y, double true_x, double true_y);

// Denormalizes predictions with the training stats before measuring.
Metrics evaluate(Model& model, const std::vector<Scan>& test, const NormStats& stats);

// CSV of one row per test scan:
// scan_id,true_x,true_y,true_floor,pred_x,pred_y,pred_floor,error_m
void export_plot_data(Model& model, const std::vector<Scan>& test, const NormStats& stats,
                      const std::string& out_path);

// "mean ± std (m)" line for reports.
std::string format_error(const Metrics& m);

void write_metrics_csv(const std::string& path, const std::string& experiment,
                       const std::string& arch, const Metrics& m);

}  // namespace setloc
