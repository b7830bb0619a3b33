#include "setloc/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "setloc/csv.hpp"
#include "setloc/optim.hpp"
#include "setloc/rng.hpp"

namespace setloc {

NormStats fit_norm_stats(const std::vector<Scan>& train) {
    if (train.size() < 2) {
        throw std::invalid_argument("fit_norm_stats: need at least 2 scans");
    }
    NormStats st;
    double sx = 0, sy = 0;
    for (const auto& s : train) {
        sx += s.x;
        sy += s.y;
    }
    st.mu_x = sx / double(train.size());
    st.mu_y = sy / double(train.size());
    double vx = 0, vy = 0;
    for (const auto& s : train) {
        vx += (s.x - st.mu_x) * (s.x - st.mu_x);
        vy += (s.y - st.mu_y) * (s.y - st.mu_y);
    }
    st.sigma_x = std::sqrt(vx / double(train.size()));
    st.sigma_y = std::sqrt(vy / double(train.size()));
    if (st.sigma_x <= 0.0 || st.sigma_y <= 0.0) {
        throw std::runtime_error("fit_norm_stats: degenerate axis (zero variance)");
    }
    return st;
}

void TrainConfig::validate() const {
    if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (accumulation_window < 1) {
        throw std::invalid_argument("TrainConfig: accumulation_window must be >= 1");
    }
    if (early_stop_patience < 0) {
        throw std::invalid_argument("TrainConfig: early_stop_patience must be >= 0");
    }
    if (!(val_fraction > 0.0 && val_fraction < 0.5)) {
        throw std::invalid_argument("TrainConfig: val_fraction must be in (0, 0.5)");
    }
}

ag::Tensor regression_loss(const Prediction& pred, double target_x_norm,
                           double target_y_norm) {
    for (double v : pred.position.values()) {
        if (!std::isfinite(v)) {
            throw std::runtime_error("regression_loss: non-finite prediction");
        }
    }
    ag::Tensor target = ag::Tensor::from({target_x_norm, target_y_norm}, 1, 2);
    ag::Tensor diff = ag::sub(pred.position, target);
    return ag::sum_all(ag::mul(diff, diff));
}

ag::Tensor total_loss(const Prediction& pred, double target_x_norm, double target_y_norm,
                      std::optional<int> class_label, double lambda) {
    ag::Tensor reg = regression_loss(pred, target_x_norm, target_y_norm);
    if (!pred.class_logits.has_value()) {
        if (class_label.has_value()) {
            throw std::invalid_argument("total_loss: class label given to a single-task model");
        }
        return reg;
    }
    if (!class_label.has_value()) {
        throw std::invalid_argument("total_loss: multi-task model needs a class label");
    }
    ag::Tensor ce = ag::cross_entropy_logits(*pred.class_logits, *class_label);
    return ag::add(reg, ag::scale(ce, lambda));
}

namespace {

double mean_val_error(Model& model, const std::vector<Scan>& scans, const NormStats& stats) {
    double total = 0.0;
    for (const auto& scan : scans) {
        Prediction pred = model.forward(scan);
        auto [px, py] = stats.denormalize(pred.position.at(0, 0), pred.position.at(0, 1));
        total += std::hypot(px - scan.x, py - scan.y);
    }
    return total / double(scans.size());
}

void average_grads(Model& model, int count) {
    const double inv = 1.0 / double(count);
    for (auto& p : model.parameters()) {
        if (!p.has_grad()) continue;
        for (auto& g : p.grad_mut()) {
            g *= inv;
        }
    }
}

}  // namespace

TrainResult train(Model& model, const ExperimentData& data, const TrainConfig& config) {
    config.validate();
    if (data.train.empty() || data.val.empty()) {
        throw std::invalid_argument("train: empty train or validation split");
    }
    const bool multi_task = model.config().multi_task;
    if (multi_task && data.class_labels.empty()) {
        throw std::invalid_argument("train: multi-task model but no class labels in data");
    }

    TrainResult result;
    result.stats = fit_norm_stats(data.train);

    AdamState adam = make_adam(model.parameters(), config.lr);
    auto shuffle_rng = make_rng(derive_seed(config.seed, 0x7a1));

    // Epoch-0 baseline: untrained weights are the incumbent best, so
    // patience counts epochs without improvement over what we started with.
    result.initial_val_error_m = mean_val_error(model, data.val, result.stats);
    double best_val = result.initial_val_error_m;
    int best_epoch = 0;
    auto best_weights = model.snapshot_weights();

    std::vector<size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        model.zero_grad();
        double sum_total = 0.0, sum_reg = 0.0, sum_class = 0.0;
        int window_count = 0;
        for (size_t pos = 0; pos < order.size(); ++pos) {
            const Scan& scan = data.train[order[pos]];
            auto [tx, ty] = result.stats.normalize(scan.x, scan.y);
            Prediction pred = model.forward(scan);
            std::optional<int> label;
            if (multi_task) {
                label = class_label_of(scan, data.spec.class_field, data.class_labels);
                if (!label) {
                    throw std::runtime_error("train: scan '" + scan.id +
                                             "' has no class label for this experiment");
                }
            }
            ag::Tensor reg = regression_loss(pred, tx, ty);
            ag::Tensor loss = reg;
            if (multi_task) {
                ag::Tensor ce = ag::cross_entropy_logits(*pred.class_logits, *label);
                loss = ag::add(reg, ag::scale(ce, config.lambda));
                sum_class += ce.item();
            }
            sum_reg += reg.item();
            sum_total += loss.item();
            ag::backward(loss);
            ++window_count;
            if (window_count == config.accumulation_window || pos + 1 == order.size()) {
                average_grads(model, window_count);
                adam_step(model.parameters(), adam);
                model.zero_grad();
                window_count = 0;
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = sum_total / double(order.size());
        stats.train_reg_loss = sum_reg / double(order.size());
        stats.train_class_loss = sum_class / double(order.size());
        stats.val_error_m = mean_val_error(model, data.val, result.stats);
        result.history.push_back(stats);
        result.epochs_run = epoch;

        if (stats.val_error_m < best_val) {
            best_val = stats.val_error_m;
            best_epoch = epoch;
            best_weights = model.snapshot_weights();
        } else if (epoch - best_epoch > config.early_stop_patience) {
            break;
        }
    }

    model.restore_weights(best_weights);
    result.best_val_error_m = best_val;
    result.best_epoch = best_epoch;
    return result;
}

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
    csv::Table table;
    table.header = {"epoch", "train_loss", "train_reg_loss", "train_class_loss", "val_error_m"};
    for (const auto& row : history) {
        table.rows.push_back({std::to_string(row.epoch), csv::format_double(row.train_loss),
                              csv::format_double(row.train_reg_loss),
                              csv::format_double(row.train_class_loss),
                              csv::format_double(row.val_error_m)});
    }
    csv::write_file(path, table);
}

}  // namespace setloc
