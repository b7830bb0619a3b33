#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>

#include "oracles.hpp"
#include "setloc/csv.hpp"
#include "setloc/evaluation.hpp"
#include "setloc/rng.hpp"
#include "setloc/synthetic.hpp"

using namespace setloc;

namespace {

// Memorizes every scan's true position in normalized space.
class OracleModel : public Model {
public:
    OracleModel(const std::vector<Scan>& scans, const NormStats& stats)
        : Model(ModelConfig::defaults(Arch::mlp), Vocabulary({"aa"}), 1) {
        for (const auto& s : scans) {
            auto [nx, ny] = stats.normalize(s.x, s.y);
            memory_[s.id] = {nx, ny};
        }
    }
    Prediction forward(const Scan& scan) override {
        Prediction p;
        auto it = memory_.find(scan.id);
        REQUIRE(it != memory_.end());
        p.position = ag::Tensor::from({it->second.first, it->second.second}, 1, 2);
        return p;
    }

private:
    std::map<std::string, std::pair<double, double>> memory_;
};

// Always predicts normalized (0, 0), i.e. the training centroid, and
// always argmaxes class 0.
class CentroidModel : public Model {
public:
    explicit CentroidModel(std::vector<std::string> labels)
        : Model(ModelConfig::defaults(Arch::mlp), Vocabulary({"aa"}), 1) {
        if (!labels.empty()) {
            set_task_labels(ClassField::floor, labels);
            n_classes_ = int(class_labels().size());
        }
    }
    Prediction forward(const Scan&) override {
        Prediction p;
        p.position = ag::Tensor::from({0.0, 0.0}, 1, 2);
        if (n_classes_ > 0) {
            std::vector<double> logits(size_t(n_classes_), 0.0);
            logits[0] = 1.0;
            p.class_logits = ag::Tensor::from(std::move(logits), 1, n_classes_);
        }
        return p;
    }

private:
    int n_classes_ = 0;
};

std::vector<Scan> labeled_scans(int n, uint64_t seed) {
    auto ds = synth_experiment_dataset(ExperimentId::e1, n, seed);
    return ds.scans;
}

}  // namespace

TEST_CASE("euclidean error basics") {
    CHECK(euclidean_error(1, 2, 1, 2) == 0.0);
    CHECK(euclidean_error(3, 4, 0, 0) == doctest::Approx(5.0));
    CHECK(euclidean_error(1, 1, 0, 0) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("a perfect-memorization model scores zero error") {
    auto scans = labeled_scans(60, 3);
    NormStats stats = fit_norm_stats(scans);
    OracleModel model(scans, stats);
    Metrics m = evaluate(model, scans, stats);
    CHECK(m.mean_error_m < 1e-6);
    CHECK(m.std_error_m < 1e-6);
}

TEST_CASE("the centroid predictor's error matches the closed-form mean distance") {
    auto scans = labeled_scans(80, 5);
    NormStats stats = fit_norm_stats(scans);
    CentroidModel model({});
    Metrics m = evaluate(model, scans, stats);

    double expect = 0.0;
    for (const auto& s : scans) {
        expect += std::hypot(s.x - stats.mu_x, s.y - stats.mu_y);
    }
    expect /= double(scans.size());
    CHECK(m.mean_error_m == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("always-class-0 scores one half on a balanced two-class set") {
    std::vector<Scan> scans;
    for (int i = 0; i < 40; ++i) {
        Scan s;
        s.id = "s" + std::to_string(i);
        s.x = double(i);
        s.y = double(i % 7);
        s.floor = (i % 2) + 1;
        s.detections = {{"aa", -50}};
        scans.push_back(std::move(s));
    }
    NormStats stats = fit_norm_stats(scans);
    CentroidModel model({"1", "2"});
    Metrics m = evaluate(model, scans, stats);
    REQUIRE(m.class_accuracy.has_value());
    CHECK(*m.class_accuracy == doctest::Approx(0.5));
}

TEST_CASE("empty test sets are rejected") {
    NormStats stats;
    CentroidModel model({});
    CHECK_THROWS_AS(evaluate(model, {}, stats), std::invalid_argument);
}

TEST_CASE("metrics agree with an independent recomputation") {
    auto scans = labeled_scans(70, 7);
    NormStats stats = fit_norm_stats(scans);
    CentroidModel model({});
    Metrics m = evaluate(model, scans, stats);

    double mean = 0, stddev = 0;
    oracles::two_pass_stats(m.per_scan_errors, mean, stddev);
    CHECK(std::fabs(m.mean_error_m - mean) <= 1e-9 * std::max(1.0, mean));
    CHECK(std::fabs(m.std_error_m - stddev) <= 1e-9 * std::max(1.0, stddev));
}

TEST_CASE("metrics are invariant under test-set permutation") {
    auto scans = labeled_scans(50, 9);
    NormStats stats = fit_norm_stats(scans);
    CentroidModel model({});
    Metrics a = evaluate(model, scans, stats);
    std::mt19937_64 rng(1);
    std::shuffle(scans.begin(), scans.end(), rng);
    Metrics b = evaluate(model, scans, stats);
    CHECK(a.mean_error_m == doctest::Approx(b.mean_error_m).epsilon(1e-12));
    CHECK(a.std_error_m == doctest::Approx(b.std_error_m).epsilon(1e-12));
}

TEST_CASE("plot data export is re-derivable and deterministic") {
    auto scans = labeled_scans(45, 11);
    NormStats stats = fit_norm_stats(scans);
    CentroidModel model({});

    const std::string path = "tmp_plot_data.csv";
    export_plot_data(model, scans, stats, path);
    csv::Table t = csv::read_file(path);
    CHECK(t.rows.size() == scans.size());

    const int cx = t.column("pred_x");
    const int cy = t.column("pred_y");
    const int tx = t.column("true_x");
    const int ty = t.column("true_y");
    const int ce = t.column("error_m");
    REQUIRE(cx >= 0);
    REQUIRE(ce >= 0);
    for (const auto& row : t.rows) {
        const double err = std::hypot(std::stod(row[size_t(cx)]) - std::stod(row[size_t(tx)]),
                                      std::stod(row[size_t(cy)]) - std::stod(row[size_t(ty)]));
        CHECK(std::fabs(err - std::stod(row[size_t(ce)])) <= 1e-9);
    }

    const std::string path2 = "tmp_plot_data2.csv";
    export_plot_data(model, scans, stats, path2);
    std::ifstream f1(path), f2(path2);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("format_error renders mean and spread") {
    Metrics m;
    m.mean_error_m = 3.821;
    m.std_error_m = 2.349;
    CHECK(format_error(m) == "3.82 ± 2.35 m");
}
