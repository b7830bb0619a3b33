#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "setloc/models.hpp"
#include "setloc/rng.hpp"
#include "setloc/training.hpp"

using namespace setloc;

namespace {

Scan make_scan(std::vector<Detection> dets) {
    Scan s;
    s.id = "t";
    s.detections = std::move(dets);
    return s;
}

Vocabulary small_vocab() { return Vocabulary({"aa", "bb", "cc", "dd", "ee", "ff"}); }

Scan random_scan(int n, std::mt19937_64& rng, int pool = 6) {
    static const char* names[] = {"aa", "bb", "cc", "dd", "ee", "ff"};
    std::uniform_real_distribution<double> rssi(-90.0, -35.0);
    std::uniform_int_distribution<int> pick(0, pool - 1);
    std::vector<Detection> dets;
    for (int i = 0; i < n; ++i) {
        dets.push_back({names[pick(rng)], rssi(rng)});
    }
    return make_scan(std::move(dets));
}

ag::Tensor find_param(Model& model, const std::string& name) {
    for (auto& p : model.parameters()) {
        if (p.name() == name) return p;
    }
    FAIL("no parameter named ", name);
    return {};
}

void fill_param(Model& model, const std::string& name, double value) {
    auto p = find_param(model, name);
    std::fill(p.values_mut().begin(), p.values_mut().end(), value);
}

void zero_all(Model& model) {
    for (auto& p : model.parameters()) {
        std::fill(p.values_mut().begin(), p.values_mut().end(), 0.0);
    }
}

std::unique_ptr<Model> build(Arch arch, uint64_t seed = 5, bool multi_task = false,
                             int num_classes = 0) {
    ModelConfig cfg = ModelConfig::defaults(arch);
    cfg.multi_task = multi_task;
    cfg.num_classes = num_classes;
    return make_model(cfg, small_vocab(), seed);
}

}  // namespace

TEST_CASE("mlp with zero weights predicts the origin") {
    auto model = build(Arch::mlp);
    zero_all(*model);
    Prediction pred = model->forward(make_scan({{"aa", -40}}));
    CHECK(pred.position.at(0, 0) == 0.0);
    CHECK(pred.position.at(0, 1) == 0.0);
}

TEST_CASE("mlp with a zero first layer ignores its input") {
    auto model = build(Arch::mlp);
    fill_param(*model, "mlp.w1", 0.0);
    std::mt19937_64 rng(1);
    Prediction a = model->forward(random_scan(4, rng));
    Prediction b = model->forward(random_scan(9, rng));
    CHECK(a.position.values() == b.position.values());
}

TEST_CASE("mlp forward matches an independent matrix evaluation") {
    auto model = build(Arch::mlp, 21);
    std::mt19937_64 rng(2);
    Scan scan = random_scan(5, rng);

    const int b = model->vocabulary().size();
    const int h = model->config().hidden;
    std::vector<double> x = encode_fixed_vector(scan, model->vocabulary());
    for (auto& v : x) {
        v = normalize_rssi(v);
    }
    auto w1 = find_param(*model, "mlp.w1").values();
    auto b1 = find_param(*model, "mlp.b1").values();
    auto w2 = find_param(*model, "mlp.w2").values();
    auto b2 = find_param(*model, "mlp.b2").values();
    auto w3 = find_param(*model, "mlp.w3").values();
    auto b3 = find_param(*model, "mlp.b3").values();
    auto h1 = oracles::relu(oracles::add_rows(oracles::matmul(x, w1, 1, b, h), b1, 1, h));
    auto h2 = oracles::relu(oracles::add_rows(oracles::matmul(h1, w2, 1, h, h), b2, 1, h));
    auto y = oracles::add_rows(oracles::matmul(h2, w3, 1, h, 2), b3, 1, 2);

    Prediction pred = model->forward(scan);
    CHECK(pred.position.at(0, 0) == doctest::Approx(y[0]).epsilon(1e-12));
    CHECK(pred.position.at(0, 1) == doctest::Approx(y[1]).epsilon(1e-12));
}

TEST_CASE("mlp rejects nothing: empty scans become the all-dropout vector") {
    auto model = build(Arch::mlp);
    CHECK_NOTHROW(model->forward(make_scan({})));
}

TEST_CASE("rnn single step reduces to tanh of the input transform") {
    auto model = build(Arch::rnn, 31);
    Scan scan = make_scan({{"bb", -52}});
    Prediction pred = model->forward(scan);

    const int in = model->config().embedding_dim + 1;
    const int h = model->config().hidden;
    auto w_in = find_param(*model, "rnn.w_in").values();
    auto bias = find_param(*model, "rnn.b").values();
    auto w_out = find_param(*model, "rnn.w_out").values();
    auto b_out = find_param(*model, "rnn.b_out").values();

    // Build s1 = [embedding | normalized rssi] by hand.
    auto emb_w = find_param(*model, "emb.weights").values();
    std::vector<double> s1(size_t(in), 0.0);
    const int idx = *model->vocabulary().lookup("bb");
    for (int j = 0; j < in - 1; ++j) {
        s1[size_t(j)] = emb_w[size_t(idx) * (in - 1) + j];
    }
    s1[size_t(in - 1)] = normalize_rssi(-52);

    auto h1 = oracles::tanh_vec(
        oracles::add_rows(oracles::matmul(s1, w_in, 1, in, h), bias, 1, h));
    auto y = oracles::add_rows(oracles::matmul(h1, w_out, 1, h, 2), b_out, 1, 2);
    CHECK(pred.position.at(0, 0) == doctest::Approx(y[0]).epsilon(1e-12));
    CHECK(pred.position.at(0, 1) == doctest::Approx(y[1]).epsilon(1e-12));
}

TEST_CASE("rnn with zero weights predicts its output bias") {
    auto model = build(Arch::rnn);
    zero_all(*model);
    auto b_out = find_param(*model, "rnn.b_out");
    b_out.values_mut() = {1.5, -2.5};
    std::mt19937_64 rng(3);
    Prediction pred = model->forward(random_scan(7, rng));
    CHECK(pred.position.at(0, 0) == 1.5);
    CHECK(pred.position.at(0, 1) == -2.5);
}

TEST_CASE("rnn forward equals three manually unrolled steps") {
    auto model = build(Arch::rnn, 33);
    Scan scan = make_scan({{"aa", -45}, {"cc", -60}, {"ee", -75}});
    Prediction pred = model->forward(scan);

    const int d = model->config().embedding_dim;
    const int in = d + 1;
    const int h = model->config().hidden;
    auto emb_w = find_param(*model, "emb.weights").values();
    auto w_in = find_param(*model, "rnn.w_in").values();
    auto w_rec = find_param(*model, "rnn.w_rec").values();
    auto bias = find_param(*model, "rnn.b").values();
    auto w_out = find_param(*model, "rnn.w_out").values();
    auto b_out = find_param(*model, "rnn.b_out").values();

    // encode_sequence sorts by RSSI descending: aa, cc, ee already ordered.
    const char* order[] = {"aa", "cc", "ee"};
    const double rssis[] = {-45, -60, -75};
    std::vector<double> hs;
    for (int step = 0; step < 3; ++step) {
        std::vector<double> s(size_t(in), 0.0);
        const int idx = *model->vocabulary().lookup(order[step]);
        for (int j = 0; j < d; ++j) {
            s[size_t(j)] = emb_w[size_t(idx) * d + j];
        }
        s[size_t(d)] = normalize_rssi(rssis[step]);
        auto pre = oracles::matmul(s, w_in, 1, in, h);
        if (!hs.empty()) {
            auto rec = oracles::matmul(hs, w_rec, 1, h, h);
            for (int j = 0; j < h; ++j) pre[size_t(j)] += rec[size_t(j)];
        }
        for (int j = 0; j < h; ++j) pre[size_t(j)] += bias[size_t(j)];
        hs = oracles::tanh_vec(pre);
    }
    auto y = oracles::add_rows(oracles::matmul(hs, w_out, 1, h, 2), b_out, 1, 2);
    CHECK(pred.position.at(0, 0) == doctest::Approx(y[0]).epsilon(1e-10));
    CHECK(pred.position.at(0, 1) == doctest::Approx(y[1]).epsilon(1e-10));
}

TEST_CASE("sequence models reject empty scans") {
    for (Arch arch : {Arch::rnn, Arch::lstm, Arch::attention, Arch::set_transformer}) {
        auto model = build(arch);
        CHECK_THROWS_AS(model->forward(make_scan({})), std::invalid_argument);
    }
}

TEST_CASE("lstm with closed gates predicts its output bias") {
    auto model = build(Arch::lstm, 41);
    // Large negative biases close input/forget/output gates.
    fill_param(*model, "lstm.b_i", -40.0);
    fill_param(*model, "lstm.b_f", -40.0);
    fill_param(*model, "lstm.b_o", -40.0);
    auto b_out = find_param(*model, "lstm.b_out");
    b_out.values_mut() = {0.25, -0.75};
    std::mt19937_64 rng(4);
    Prediction pred = model->forward(random_scan(6, rng));
    CHECK(pred.position.at(0, 0) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(pred.position.at(0, 1) == doctest::Approx(-0.75).epsilon(1e-9));
}

TEST_CASE("lstm single step matches a hand-rolled cell") {
    auto model = build(Arch::lstm, 43);
    Scan scan = make_scan({{"dd", -58}});
    Prediction pred = model->forward(scan);

    const int d = model->config().embedding_dim;
    const int in = d + 1;
    const int h = model->config().hidden;
    auto emb_w = find_param(*model, "emb.weights").values();
    std::vector<double> s(size_t(in), 0.0);
    const int idx = *model->vocabulary().lookup("dd");
    for (int j = 0; j < d; ++j) {
        s[size_t(j)] = emb_w[size_t(idx) * d + j];
    }
    s[size_t(d)] = normalize_rssi(-58);

    std::vector<double> w_in[4], w_rec[4], b[4];
    const char* gates[] = {"i", "f", "o", "g"};
    for (int k = 0; k < 4; ++k) {
        w_in[k] = find_param(*model, std::string("lstm.w_") + gates[k]).values();
        w_rec[k] = find_param(*model, std::string("lstm.u_") + gates[k]).values();
        b[k] = find_param(*model, std::string("lstm.b_") + gates[k]).values();
    }
    oracles::LstmCellRef cell;
    std::vector<double> c_out;
    auto h_out = cell.step(s, {}, {}, w_in, w_rec, b, in, h, c_out);
    auto w_out = find_param(*model, "lstm.w_out").values();
    auto b_out = find_param(*model, "lstm.b_out").values();
    auto y = oracles::add_rows(oracles::matmul(h_out, w_out, 1, h, 2), b_out, 1, 2);
    CHECK(pred.position.at(0, 0) == doctest::Approx(y[0]).epsilon(1e-10));
    CHECK(pred.position.at(0, 1) == doctest::Approx(y[1]).epsilon(1e-10));
}

TEST_CASE("attention pooling of a singleton set returns that element") {
    auto model = build(Arch::attention, 51);
    // With one row, alpha = 1 and z = s1; verify through a zeroed head that
    // copies z: set w1 so h1 = relu(z W1) with W1 = I-ish is overkill, so
    // instead check the convexity fixed point with identical rows.
    Scan one = make_scan({{"aa", -50}});
    Scan many = make_scan({{"aa", -50}, {"aa", -50}, {"aa", -50}});
    Prediction p1 = model->forward(one);
    Prediction p3 = model->forward(many);
    for (int c = 0; c < 2; ++c) {
        CHECK(p1.position.at(0, c) == doctest::Approx(p3.position.at(0, c)).epsilon(1e-12));
    }
}

TEST_CASE("attention output is invariant under input permutation") {
    auto model = build(Arch::attention, 53);
    std::mt19937_64 rng(6);
    Scan scan = random_scan(12, rng);
    Prediction base = model->forward(scan);
    for (int trial = 0; trial < 10; ++trial) {
        Scan shuffled = scan;
        std::shuffle(shuffled.detections.begin(), shuffled.detections.end(), rng);
        Prediction p = model->forward(shuffled);
        for (int c = 0; c < 2; ++c) {
            CHECK(std::fabs(p.position.at(0, c) - base.position.at(0, c)) < 1e-5);
        }
    }
}

TEST_CASE("set transformer output is invariant under input permutation") {
    auto model = build(Arch::set_transformer, 55);
    std::mt19937_64 rng(7);
    Scan scan = random_scan(20, rng);
    Prediction base = model->forward(scan);
    for (int trial = 0; trial < 10; ++trial) {
        Scan shuffled = scan;
        std::shuffle(shuffled.detections.begin(), shuffled.detections.end(), rng);
        Prediction p = model->forward(shuffled);
        for (int c = 0; c < 2; ++c) {
            CHECK(std::fabs(p.position.at(0, c) - base.position.at(0, c)) < 1e-5);
        }
    }
}

TEST_CASE("set transformer handles singleton sets") {
    auto model = build(Arch::set_transformer, 57);
    Prediction pred = model->forward(make_scan({{"bb", -66}}));
    CHECK(std::isfinite(pred.position.at(0, 0)));
    CHECK(std::isfinite(pred.position.at(0, 1)));
}

TEST_CASE("set transformer weighs multiset mass: duplicating a row changes the output") {
    auto model = build(Arch::set_transformer, 59);
    Scan once = make_scan({{"aa", -50}, {"bb", -70}});
    Scan twice = make_scan({{"aa", -50}, {"bb", -70}, {"bb", -70}});
    Prediction p1 = model->forward(once);
    Prediction p2 = model->forward(twice);
    const double diff = std::fabs(p1.position.at(0, 0) - p2.position.at(0, 0)) +
                        std::fabs(p1.position.at(0, 1) - p2.position.at(0, 1));
    CHECK(diff > 1e-9);
}

TEST_CASE("sequence models are invariant to raw scan order via canonical sorting") {
    std::mt19937_64 rng(8);
    Scan scan = random_scan(15, rng);
    for (Arch arch : {Arch::rnn, Arch::lstm}) {
        auto model = build(arch, 61);
        Prediction base = model->forward(scan);
        for (int trial = 0; trial < 5; ++trial) {
            Scan shuffled = scan;
            std::shuffle(shuffled.detections.begin(), shuffled.detections.end(), rng);
            Prediction p = model->forward(shuffled);
            CHECK(p.position.values() == base.position.values());  // bit-identical
        }
    }
}

TEST_CASE("every architecture returns finite outputs across set sizes") {
    std::mt19937_64 rng(9);
    for (Arch arch :
         {Arch::mlp, Arch::rnn, Arch::lstm, Arch::attention, Arch::set_transformer}) {
        auto model = build(arch, 63);
        for (int n : {1, 2, 3, 5, 17, 64, 200}) {
            Scan scan = random_scan(n, rng);
            Prediction pred = model->forward(scan);
            CAPTURE(to_string(arch));
            CAPTURE(n);
            CHECK(std::isfinite(pred.position.at(0, 0)));
            CHECK(std::isfinite(pred.position.at(0, 1)));
        }
    }
}

TEST_CASE("gradient reaches every declared parameter") {
    std::mt19937_64 rng(10);
    for (Arch arch :
         {Arch::mlp, Arch::rnn, Arch::lstm, Arch::attention, Arch::set_transformer}) {
        const bool multi = arch == Arch::set_transformer;
        auto model = build(arch, 65, multi, multi ? 3 : 0);
        Scan scan = random_scan(6, rng);
        Prediction pred = model->forward(scan);
        ag::Tensor loss = total_loss(pred, 0.3, -0.2, multi ? std::optional<int>(1) : std::nullopt,
                                     1.0);
        ag::backward(loss);
        for (const auto& p : model->parameters()) {
            CAPTURE(to_string(arch));
            CAPTURE(p.name());
            REQUIRE(p.has_grad());
            bool any = false;
            for (double g : p.grad()) {
                if (g != 0.0) {
                    any = true;
                    break;
                }
            }
            CHECK(any);
        }
    }
}

TEST_CASE("multi-task head produces logits of the configured size") {
    auto model = build(Arch::set_transformer, 67, true, 3);
    std::mt19937_64 rng(11);
    Prediction pred = model->forward(random_scan(5, rng));
    REQUIRE(pred.class_logits.has_value());
    CHECK(pred.class_logits->rows() == 1);
    CHECK(pred.class_logits->cols() == 3);

    auto single = build(Arch::set_transformer, 67);
    CHECK_FALSE(single->forward(random_scan(5, rng)).class_logits.has_value());
}

TEST_CASE("zero classification head gives uniform class probabilities") {
    auto model = build(Arch::lstm, 69, true, 4);
    fill_param(*model, "lstm.class_w", 0.0);
    fill_param(*model, "lstm.class_b", 0.0);
    std::mt19937_64 rng(12);
    Prediction pred = model->forward(random_scan(4, rng));
    ag::Tensor probs = ag::softmax_rows(*pred.class_logits);
    for (int c = 0; c < 4; ++c) {
        CHECK(probs.at(0, c) == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("class logits argmax matches a brute-force affine evaluation") {
    auto model = build(Arch::attention, 71, true, 3);
    std::mt19937_64 rng(13);
    Scan scan = random_scan(8, rng);
    Prediction pred = model->forward(scan);

    // Recompute z and the affine map with plain arithmetic.
    EncodedSet set = encode_set(scan, model->vocabulary(),
                                EmbeddingTable{find_param(*model, "emb.weights"),
                                               model->config().embedding_dim, 0.1},
                                model->fallback_seed());
    const int in = model->config().embedding_dim + 1;
    const int n = set.count;
    auto q = find_param(*model, "attn.query").values();
    std::vector<double> scores(size_t(n), 0.0);
    double mx = -1e300;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < in; ++j) {
            scores[size_t(i)] += q[size_t(j)] * set.rows.at(i, j);
        }
        mx = std::max(mx, scores[size_t(i)]);
    }
    double denom = 0.0;
    for (double& sc : scores) {
        sc = std::exp(sc - mx);
        denom += sc;
    }
    std::vector<double> z(size_t(in), 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < in; ++j) {
            z[size_t(j)] += (scores[size_t(i)] / denom) * set.rows.at(i, j);
        }
    }
    auto wc = find_param(*model, "attn.class_w").values();
    auto bc = find_param(*model, "attn.class_b").values();
    auto logits = oracles::add_rows(oracles::matmul(z, wc, 1, in, 3), bc, 1, 3);
    const int ref_argmax =
        int(std::max_element(logits.begin(), logits.end()) - logits.begin());

    const auto& lv = pred.class_logits->values();
    const int got_argmax = int(std::max_element(lv.begin(), lv.end()) - lv.begin());
    CHECK(got_argmax == ref_argmax);
    for (int c = 0; c < 3; ++c) {
        CHECK(lv[size_t(c)] == doctest::Approx(logits[size_t(c)]).epsilon(1e-9));
    }
}

TEST_CASE("multi-task config validation") {
    ModelConfig cfg = ModelConfig::defaults(Arch::set_transformer);
    cfg.multi_task = true;
    cfg.num_classes = 1;
    CHECK_THROWS_AS(make_model(cfg, small_vocab(), 1), std::invalid_argument);

    ModelConfig bad_heads = ModelConfig::defaults(Arch::set_transformer);
    bad_heads.heads = 5;  // does not divide width 32
    CHECK_THROWS_AS(make_model(bad_heads, small_vocab(), 1), std::invalid_argument);
}

TEST_CASE("default configurations sit in one capacity band") {
    // Reference vocabulary of 100 BSSIDs, the scale the widths were tuned at.
    std::vector<std::string> bssids;
    for (int i = 0; i < 100; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "ap:%03d", i);
        bssids.push_back(buf);
    }
    Vocabulary vocab(bssids);

    std::vector<size_t> counts;
    for (Arch arch :
         {Arch::mlp, Arch::rnn, Arch::lstm, Arch::attention, Arch::set_transformer}) {
        auto model = make_model(ModelConfig::defaults(arch), vocab, 1);
        counts.push_back(model->parameter_count());
    }
    const size_t lo = *std::min_element(counts.begin(), counts.end());
    const size_t hi = *std::max_element(counts.begin(), counts.end());
    CAPTURE(lo);
    CAPTURE(hi);
    CHECK(double(hi) / double(lo) <= 1.25);
}

TEST_CASE("fixed seed builds bit-identical models") {
    auto a = build(Arch::set_transformer, 77);
    auto b = build(Arch::set_transformer, 77);
    std::mt19937_64 rng(14);
    Scan scan = random_scan(9, rng);
    CHECK(a->forward(scan).position.values() == b->forward(scan).position.values());
}
