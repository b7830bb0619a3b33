#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "setloc/autograd.hpp"
#include "setloc/optim.hpp"

using namespace setloc;
namespace t = setloc::ag;

namespace {

t::Tensor random_tensor(int rows, int cols, std::mt19937_64& rng, bool requires_grad = true) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(size_t(rows) * cols);
    for (auto& x : v) {
        x = dist(rng);
    }
    return t::Tensor::from(std::move(v), rows, cols, requires_grad);
}

// FD-checks d(eval())/d(leaf) for every coordinate of `leaf`, where eval
// rebuilds the graph from current leaf values each call.
void check_gradients(t::Tensor& leaf, const std::function<t::Tensor()>& make_loss) {
    leaf.zero_grad();  // earlier checks may have left gradients behind
    t::Tensor loss = make_loss();
    t::backward(loss);
    REQUIRE(leaf.has_grad());
    auto analytic = leaf.grad();
    for (size_t i = 0; i < leaf.numel(); ++i) {
        const double fd = oracles::finite_difference(
            leaf.values_mut(), i, [&] { return make_loss().item(); });
        CAPTURE(i);
        CHECK(oracles::rel_error(analytic[i], fd) < 1e-3);
    }
    leaf.zero_grad();
}

}  // namespace

TEST_CASE("relu matches its definition") {
    t::Tensor x = t::Tensor::from({-1, 0, 2}, 1, 3);
    t::Tensor y = t::relu(x);
    CHECK(y.values() == std::vector<double>{0, 0, 2});
}

TEST_CASE("softmax of equal scores is uniform") {
    t::Tensor x = t::Tensor::from({0.7, 0.7, 0.7}, 1, 3);
    t::Tensor y = t::softmax_rows(x);
    for (double v : y.values()) {
        CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("matmul by identity is identity") {
    t::Tensor eye = t::Tensor::from({1, 0, 0, 0, 1, 0, 0, 0, 1}, 3, 3);
    std::mt19937_64 rng(7);
    t::Tensor a = random_tensor(3, 5, rng, false);
    t::Tensor out = t::matmul(eye, a);
    CHECK(out.values() == a.values());
}

TEST_CASE("matmul shape mismatch raises a dimension error") {
    std::mt19937_64 rng(1);
    t::Tensor a = random_tensor(3, 4, rng);
    t::Tensor b = random_tensor(5, 2, rng);
    CHECK_THROWS_WITH_AS(t::matmul(a, b), doctest::Contains("3x4"), std::invalid_argument);
}

TEST_CASE("non-scalar loss is rejected") {
    std::mt19937_64 rng(2);
    t::Tensor a = random_tensor(2, 2, rng);
    CHECK_THROWS_AS(t::backward(a), std::invalid_argument);
}

TEST_CASE("degenerate shapes are rejected") {
    CHECK_THROWS_AS(t::Tensor::zeros(0, 3), std::invalid_argument);
    CHECK_THROWS_AS(t::Tensor::zeros(3, 0), std::invalid_argument);
}

TEST_CASE("mse gradient on a single element is 2x") {
    t::Tensor x = t::Tensor::from({3.0}, 1, 1, true);
    t::Tensor zero = t::Tensor::from({0.0}, 1, 1);
    t::Tensor loss = t::mse(x, zero);
    CHECK(loss.item() == doctest::Approx(9.0));
    t::backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("sum of relu gradient masks negative inputs") {
    t::Tensor x = t::Tensor::from({-1.0, 2.0}, 1, 2, true);
    t::backward(t::sum_all(t::relu(x)));
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 1.0);
}

TEST_CASE("gradients accumulate across backward calls until zero_grad") {
    t::Tensor x = t::Tensor::from({2.0}, 1, 1, true);
    t::backward(t::sum_all(t::mul(x, x)));
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    t::backward(t::sum_all(t::mul(x, x)));
    CHECK(x.grad()[0] == doctest::Approx(8.0));
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("every primitive passes a finite-difference gradient check") {
    std::mt19937_64 rng(42);

    SUBCASE("matmul") {
        t::Tensor a = random_tensor(3, 4, rng);
        t::Tensor b = random_tensor(4, 2, rng);
        check_gradients(a, [&] { return t::sum_all(t::matmul(a, b)); });
        check_gradients(b, [&] { return t::sum_all(t::mul(t::matmul(a, b), t::matmul(a, b))); });
    }
    SUBCASE("add sub mul with row broadcast") {
        t::Tensor a = random_tensor(3, 4, rng);
        t::Tensor bias = random_tensor(1, 4, rng);
        check_gradients(a, [&] { return t::sum_all(t::mul(t::add(a, bias), t::sub(a, bias))); });
        check_gradients(bias,
                        [&] { return t::sum_all(t::mul(t::add(a, bias), t::sub(a, bias))); });
        check_gradients(bias, [&] { return t::sum_all(t::mul(a, bias)); });
    }
    SUBCASE("scale") {
        t::Tensor a = random_tensor(2, 3, rng);
        check_gradients(a, [&] { return t::sum_all(t::scale(a, -1.7)); });
    }
    SUBCASE("activations") {
        t::Tensor a = random_tensor(2, 5, rng);
        check_gradients(a, [&] { return t::sum_all(t::relu(a)); });
        check_gradients(a, [&] { return t::sum_all(t::tanh(a)); });
        check_gradients(a, [&] { return t::sum_all(t::sigmoid(a)); });
    }
    SUBCASE("softmax") {
        t::Tensor a = random_tensor(3, 4, rng);
        t::Tensor w = random_tensor(3, 4, rng, false);
        check_gradients(a, [&] { return t::sum_all(t::mul(t::softmax_rows(a), w)); });
    }
    SUBCASE("layernorm") {
        t::Tensor a = random_tensor(3, 6, rng);
        t::Tensor w = random_tensor(3, 6, rng, false);
        check_gradients(a, [&] { return t::sum_all(t::mul(t::layernorm_rows(a), w)); });
    }
    SUBCASE("transpose and slices") {
        t::Tensor a = random_tensor(4, 5, rng);
        check_gradients(a, [&] {
            auto tr = t::transpose(a);  // 5x4
            return t::sum_all(t::matmul(t::slice_rows(tr, 1, 2), t::slice_cols(a, 1, 2)));
        });
    }
    SUBCASE("concat") {
        t::Tensor a = random_tensor(2, 3, rng);
        t::Tensor b = random_tensor(2, 3, rng);
        check_gradients(a, [&] {
            auto rows = t::concat_rows({a, b});
            auto cols = t::concat_cols({a, b});
            return t::add(t::mean_all(t::mul(rows, rows)), t::sum_all(t::mul(cols, cols)));
        });
    }
    SUBCASE("mse and mean") {
        t::Tensor a = random_tensor(2, 4, rng);
        t::Tensor b = random_tensor(2, 4, rng);
        check_gradients(a, [&] { return t::mse(a, b); });
        check_gradients(b, [&] { return t::add(t::mse(a, b), t::mean_all(b)); });
    }
    SUBCASE("embedding_rows") {
        t::Tensor table = random_tensor(6, 3, rng);
        t::Tensor fallback = random_tensor(4, 3, rng, false);
        std::vector<int> index = {2, -1, 0, 2};  // repeated row accumulates twice
        check_gradients(table, [&] {
            auto rows = t::embedding_rows(table, index, fallback);
            return t::sum_all(t::mul(rows, rows));
        });
    }
    SUBCASE("cross entropy") {
        t::Tensor logits = random_tensor(1, 5, rng);
        check_gradients(logits, [&] { return t::cross_entropy_logits(logits, 3); });
    }
}

TEST_CASE("composite graph passes a finite-difference check") {
    std::mt19937_64 rng(11);
    t::Tensor w1 = random_tensor(5, 4, rng);
    t::Tensor x = random_tensor(2, 5, rng, false);
    auto loss = [&] {
        auto h = t::tanh(t::matmul(x, w1));
        auto s = t::softmax_rows(h);
        auto n = t::layernorm_rows(t::sigmoid(h));
        return t::mse(s, n);
    };
    check_gradients(w1, loss);
}

TEST_CASE("softmax rows are non-negative and sum to one") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        t::Tensor a = random_tensor(4, 7, rng, false);
        t::Tensor y = t::softmax_rows(t::scale(a, 10.0));
        for (int r = 0; r < y.rows(); ++r) {
            double sum = 0.0;
            for (int c = 0; c < y.cols(); ++c) {
                CHECK(y.at(r, c) >= 0.0);
                sum += y.at(r, c);
            }
            CHECK(std::fabs(sum - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("layernorm rows have zero mean and unit variance") {
    std::mt19937_64 rng(4);
    t::Tensor a = random_tensor(5, 16, rng, false);
    t::Tensor y = t::layernorm_rows(t::scale(a, 5.0));
    for (int r = 0; r < y.rows(); ++r) {
        double mean = 0.0;
        for (int c = 0; c < y.cols(); ++c) {
            mean += y.at(r, c);
        }
        mean /= y.cols();
        CHECK(std::fabs(mean) < 1e-6);
        double var = 0.0;
        for (int c = 0; c < y.cols(); ++c) {
            var += (y.at(r, c) - mean) * (y.at(r, c) - mean);
        }
        var /= y.cols();
        CHECK(std::fabs(var - 1.0) < 1e-4);
    }
}

TEST_CASE("fixed seed gives bit-identical forward values") {
    auto run = [] {
        std::mt19937_64 rng(99);
        t::Tensor a = random_tensor(3, 3, rng, false);
        t::Tensor b = random_tensor(3, 3, rng, false);
        return t::softmax_rows(t::matmul(t::tanh(a), b)).values();
    };
    CHECK(run() == run());
}

TEST_CASE("adam leaves parameters unchanged under zero gradients") {
    std::mt19937_64 rng(5);
    std::vector<t::Tensor> params = {random_tensor(2, 3, rng)};
    const auto before = params[0].values();
    t::backward(t::sum_all(t::scale(params[0], 0.0)));
    AdamState st = make_adam(params, 1e-3);
    adam_step(params, st);
    CHECK(params[0].values() == before);
    CHECK(st.step == 1);
}

TEST_CASE("first adam step moves a scalar by roughly lr against the gradient sign") {
    t::Tensor w = t::Tensor::from({0.5}, 1, 1, true);
    w.set_name("w");
    std::vector<t::Tensor> params = {w};
    t::backward(t::sum_all(t::scale(w, 3.0)));  // constant gradient 3
    AdamState st = make_adam(params, 0.01);
    adam_step(params, st);
    CHECK(w.values()[0] == doctest::Approx(0.5 - 0.01).epsilon(1e-4));
}

TEST_CASE("adam with a missing gradient names the parameter") {
    std::mt19937_64 rng(6);
    std::vector<t::Tensor> params = {random_tensor(1, 2, rng)};
    params[0].set_name("lonely.weight");
    AdamState st = make_adam(params, 1e-3);
    CHECK_THROWS_WITH_AS(adam_step(params, st), doctest::Contains("lonely.weight"),
                         std::runtime_error);
}

TEST_CASE("adam matches the scalar reference recurrence on a quadratic") {
    // f(w) = (w - 3)^2, w0 = 0, lr = 0.1, 10 steps.
    t::Tensor w = t::Tensor::from({0.0}, 1, 1, true);
    w.set_name("w");
    std::vector<t::Tensor> params = {w};
    AdamState st = make_adam(params, 0.1);

    oracles::ScalarAdam ref;
    ref.lr = 0.1;
    double ref_w = 0.0;

    for (int step = 0; step < 10; ++step) {
        t::Tensor target = t::Tensor::from({3.0}, 1, 1);
        t::Tensor diff = t::sub(w, target);
        t::backward(t::sum_all(t::mul(diff, diff)));
        adam_step(params, st);
        w.zero_grad();
        ref_w = ref.step(ref_w, 2.0 * (ref_w - 3.0));
        CHECK(w.values()[0] == doctest::Approx(ref_w).epsilon(1e-12));
    }
    CHECK(std::fabs(w.values()[0] - 3.0) < 3.0);  // strictly closer than w0
}
