#include "setloc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "setloc/csv.hpp"

namespace setloc {

double euclidean_error(double pred_x, double pred_y, double true_x, double true_y) {
    return std::hypot(pred_x - true_x, pred_y - true_y);
}

namespace {

int argmax_row(const ag::Tensor& logits) {
    const auto& v = logits.values();
    return int(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

Metrics evaluate(Model& model, const std::vector<Scan>& test, const NormStats& stats) {
    if (test.empty()) {
        throw std::invalid_argument("evaluate: empty test set");
    }
    Metrics m;
    m.per_scan_errors.reserve(test.size());
    size_t labeled = 0, correct = 0;
    for (const auto& scan : test) {
        Prediction pred = model.forward(scan);
        auto [px, py] = stats.denormalize(pred.position.at(0, 0), pred.position.at(0, 1));
        if (!std::isfinite(px) || !std::isfinite(py)) {
            throw std::runtime_error("evaluate: non-finite prediction for scan '" + scan.id +
                                     "'");
        }
        m.per_scan_errors.push_back(euclidean_error(px, py, scan.x, scan.y));
        if (pred.class_logits) {
            auto label = class_label_of(scan, model.class_field(), model.class_labels());
            if (label) {
                ++labeled;
                if (argmax_row(*pred.class_logits) == *label) ++correct;
            }
        }
    }
    double sum = 0.0;
    for (double e : m.per_scan_errors) {
        sum += e;
    }
    m.mean_error_m = sum / double(m.per_scan_errors.size());
    double var = 0.0;
    for (double e : m.per_scan_errors) {
        var += (e - m.mean_error_m) * (e - m.mean_error_m);
    }
    m.std_error_m = std::sqrt(var / double(m.per_scan_errors.size()));
    if (labeled > 0) {
        m.class_accuracy = double(correct) / double(labeled);
    }
    return m;
}

void export_plot_data(Model& model, const std::vector<Scan>& test, const NormStats& stats,
                      const std::string& out_path) {
    if (test.empty()) {
        throw std::invalid_argument("export_plot_data: empty test set");
    }
    csv::Table table;
    table.header = {"scan_id", "true_x", "true_y", "true_floor",
                    "pred_x",  "pred_y", "pred_floor", "error_m"};
    for (const auto& scan : test) {
        Prediction pred = model.forward(scan);
        auto [px, py] = stats.denormalize(pred.position.at(0, 0), pred.position.at(0, 1));
        std::string pred_floor;
        if (pred.class_logits && model.class_field() == ClassField::floor) {
            const int cls = argmax_row(*pred.class_logits);
            if (cls < int(model.class_labels().size())) {
                pred_floor = model.class_labels()[size_t(cls)];
            }
        }
        table.rows.push_back({scan.id,
                              csv::format_double(scan.x),
                              csv::format_double(scan.y),
                              scan.floor ? std::to_string(*scan.floor) : "",
                              csv::format_double(px),
                              csv::format_double(py),
                              pred_floor,
                              csv::format_double(euclidean_error(px, py, scan.x, scan.y))});
    }
    csv::write_file(out_path, table);
}

std::string format_error(const Metrics& m) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f ± %.2f m", m.mean_error_m, m.std_error_m);
    return buf;
}

void write_metrics_csv(const std::string& path, const std::string& experiment,
                       const std::string& arch, const Metrics& m) {
    csv::Table table;
    table.header = {"experiment", "arch", "mean_error_m", "std_error_m", "class_accuracy",
                    "n_test"};
    table.rows.push_back({experiment, arch, csv::format_double(m.mean_error_m),
                          csv::format_double(m.std_error_m),
                          m.class_accuracy ? csv::format_double(*m.class_accuracy) : "",
                          std::to_string(m.per_scan_errors.size())});
    csv::write_file(path, table);
}

}  // namespace setloc
