#include "setloc/models.hpp"

#include <cmath>
#include <stdexcept>

#include "setloc/rng.hpp"

namespace setloc {

namespace {
const std::vector<std::string> kArchNames = {"mlp", "rnn", "lstm", "attention",
                                             "set_transformer"};
}

Arch arch_from_string(const std::string& s) {
    if (s == "mlp") return Arch::mlp;
    if (s == "rnn") return Arch::rnn;
    if (s == "lstm") return Arch::lstm;
    if (s == "attention") return Arch::attention;
    if (s == "set_transformer") return Arch::set_transformer;
    std::string known;
    for (const auto& n : kArchNames) {
        known += (known.empty() ? "" : ", ") + n;
    }
    throw std::invalid_argument("unknown arch '" + s + "' (expected one of: " + known + ")");
}

std::string to_string(Arch arch) { return kArchNames[size_t(arch)]; }

const std::vector<std::string>& arch_names() { return kArchNames; }

ModelConfig ModelConfig::defaults(Arch arch) {
    ModelConfig cfg;
    cfg.arch = arch;
    // Widths calibrated so all five land in the same parameter-count band
    // (within +-25% of each other at a 100-BSSID vocabulary), anchored on
    // an LSTM with hidden state 64.
    switch (arch) {
        case Arch::mlp: cfg.hidden = 112; break;
        case Arch::rnn: cfg.hidden = 136; break;
        case Arch::lstm: cfg.hidden = 64; break;
        case Arch::attention: cfg.hidden = 136; break;
        case Arch::set_transformer: cfg.hidden = 32; break;
    }
    return cfg;
}

void ModelConfig::validate() const {
    if (embedding_dim < 1) {
        throw std::invalid_argument("ModelConfig: embedding_dim must be >= 1");
    }
    if (hidden < 1) {
        throw std::invalid_argument("ModelConfig: hidden must be >= 1");
    }
    if (arch == Arch::set_transformer) {
        if (sab_blocks < 1) {
            throw std::invalid_argument("ModelConfig: sab_blocks must be >= 1");
        }
        if (heads < 1 || hidden % heads != 0) {
            throw std::invalid_argument("ModelConfig: heads (" + std::to_string(heads) +
                                        ") must divide the model width (" +
                                        std::to_string(hidden) + ")");
        }
    }
    if (multi_task && num_classes < 2) {
        throw std::invalid_argument("ModelConfig: multi-task head needs num_classes >= 2");
    }
}

Model::Model(ModelConfig config, Vocabulary vocab, uint64_t init_seed)
    : config_(std::move(config)),
      vocab_(std::move(vocab)),
      init_seed_(init_seed),
      fallback_seed_(derive_seed(init_seed, 0xfa11)),
      rng_(make_rng(derive_seed(init_seed, 0x1417))) {
    config_.validate();
    if (config_.arch != Arch::mlp) {
        emb_ = make_embedding_table(vocab_.size(), config_.embedding_dim, 0.1, rng_);
        params_.push_back(emb_.weights);
    }
}

ag::Tensor Model::add_param(const std::string& name, int rows, int cols, double scale) {
    ag::Tensor t = ag::Tensor::uniform(rows, cols, scale, rng_, name);
    params_.push_back(t);
    return t;
}

ag::Tensor Model::add_param_values(const std::string& name, int rows, int cols,
                                   std::vector<double> values) {
    ag::Tensor t = ag::Tensor::from(std::move(values), rows, cols, true);
    t.set_name(name);
    params_.push_back(t);
    return t;
}

ag::Tensor Model::add_linear_weight(const std::string& name, int in_dim, int out_dim) {
    return add_param(name, in_dim, out_dim, 1.0 / std::sqrt(double(in_dim)));
}

ag::Tensor Model::add_zero_bias(const std::string& name, int dim) {
    return add_param_values(name, 1, dim, std::vector<double>(size_t(dim), 0.0));
}

size_t Model::parameter_count() const {
    size_t n = 0;
    for (const auto& p : params_) {
        n += p.numel();
    }
    return n;
}

void Model::zero_grad() {
    for (auto& p : params_) {
        p.zero_grad();
    }
}

void Model::set_task_labels(ClassField field, std::vector<std::string> labels) {
    class_field_ = field;
    class_labels_ = std::move(labels);
}

std::vector<std::vector<double>> Model::snapshot_weights() const {
    std::vector<std::vector<double>> snap;
    snap.reserve(params_.size());
    for (const auto& p : params_) {
        snap.push_back(p.values());
    }
    return snap;
}

void Model::restore_weights(const std::vector<std::vector<double>>& snapshot) {
    if (snapshot.size() != params_.size()) {
        throw std::invalid_argument("restore_weights: snapshot size mismatch");
    }
    for (size_t i = 0; i < params_.size(); ++i) {
        if (snapshot[i].size() != params_[i].numel()) {
            throw std::invalid_argument("restore_weights: shape mismatch at parameter '" +
                                        params_[i].name() + "'");
        }
        params_[i].values_mut() = snapshot[i];
    }
}

ag::Tensor Model::maybe_class_logits(const ag::Tensor& pooled) {
    return ag::add(ag::matmul(pooled, class_w_), class_b_);
}

namespace {

// Row-vector convention throughout: activations are 1xK, weights IN x OUT.

class MlpModel : public Model {
public:
    MlpModel(ModelConfig cfg, Vocabulary vocab, uint64_t seed)
        : Model(std::move(cfg), std::move(vocab), seed) {
        const int b = vocab_.size();
        const int h = config_.hidden;
        w1_ = add_linear_weight("mlp.w1", b, h);
        b1_ = add_zero_bias("mlp.b1", h);
        w2_ = add_linear_weight("mlp.w2", h, h);
        b2_ = add_zero_bias("mlp.b2", h);
        w3_ = add_linear_weight("mlp.w3", h, 2);
        b3_ = add_zero_bias("mlp.b3", 2);
        if (config_.multi_task) {
            class_w_ = add_linear_weight("mlp.class_w", h, config_.num_classes);
            class_b_ = add_zero_bias("mlp.class_b", config_.num_classes);
        }
    }

    Prediction forward(const Scan& scan) override {
        std::vector<double> raw = encode_fixed_vector(scan, vocab_);
        for (auto& v : raw) {
            v = normalize_rssi(v);
        }
        ag::Tensor x = ag::Tensor::from(std::move(raw), 1, vocab_.size());
        ag::Tensor h1 = ag::relu(ag::add(ag::matmul(x, w1_), b1_));
        ag::Tensor h2 = ag::relu(ag::add(ag::matmul(h1, w2_), b2_));
        Prediction pred;
        pred.position = ag::add(ag::matmul(h2, w3_), b3_);
        if (config_.multi_task) {
            pred.class_logits = maybe_class_logits(h2);
        }
        return pred;
    }

private:
    ag::Tensor w1_, b1_, w2_, b2_, w3_, b3_;
};

class RnnModel : public Model {
public:
    RnnModel(ModelConfig cfg, Vocabulary vocab, uint64_t seed)
        : Model(std::move(cfg), std::move(vocab), seed) {
        const int in = config_.embedding_dim + 1;
        const int h = config_.hidden;
        w_in_ = add_linear_weight("rnn.w_in", in, h);
        w_rec_ = add_linear_weight("rnn.w_rec", h, h);
        b_ = add_zero_bias("rnn.b", h);
        w_out_ = add_linear_weight("rnn.w_out", h, 2);
        b_out_ = add_zero_bias("rnn.b_out", 2);
        if (config_.multi_task) {
            class_w_ = add_linear_weight("rnn.class_w", h, config_.num_classes);
            class_b_ = add_zero_bias("rnn.class_b", config_.num_classes);
        }
    }

    Prediction forward(const Scan& scan) override {
        EncodedSet seq = encode_sequence(scan, vocab_, emb_, fallback_seed_);
        ag::Tensor h;
        for (int i = 0; i < seq.count; ++i) {
            ag::Tensor s = ag::slice_rows(seq.rows, i, 1);
            ag::Tensor pre = ag::add(ag::matmul(s, w_in_), b_);
            if (h.defined()) {
                pre = ag::add(pre, ag::matmul(h, w_rec_));
            }
            h = ag::tanh(pre);
        }
        Prediction pred;
        pred.position = ag::add(ag::matmul(h, w_out_), b_out_);
        if (config_.multi_task) {
            pred.class_logits = maybe_class_logits(h);
        }
        return pred;
    }

private:
    ag::Tensor w_in_, w_rec_, b_, w_out_, b_out_;
};

class LstmModel : public Model {
public:
    LstmModel(ModelConfig cfg, Vocabulary vocab, uint64_t seed)
        : Model(std::move(cfg), std::move(vocab), seed) {
        const int in = config_.embedding_dim + 1;
        const int h = config_.hidden;
        const char* gates[] = {"i", "f", "o", "g"};
        for (int k = 0; k < 4; ++k) {
            const std::string g = gates[k];
            w_in_[k] = add_linear_weight("lstm.w_" + g, in, h);
            w_rec_[k] = add_linear_weight("lstm.u_" + g, h, h);
            b_[k] = add_zero_bias("lstm.b_" + g, h);
        }
        w_out_ = add_linear_weight("lstm.w_out", h, 2);
        b_out_ = add_zero_bias("lstm.b_out", 2);
        if (config_.multi_task) {
            class_w_ = add_linear_weight("lstm.class_w", h, config_.num_classes);
            class_b_ = add_zero_bias("lstm.class_b", config_.num_classes);
        }
    }

    Prediction forward(const Scan& scan) override {
        EncodedSet seq = encode_sequence(scan, vocab_, emb_, fallback_seed_);
        ag::Tensor h, c;
        for (int i = 0; i < seq.count; ++i) {
            ag::Tensor s = ag::slice_rows(seq.rows, i, 1);
            auto gate_pre = [&](int k) {
                ag::Tensor pre = ag::add(ag::matmul(s, w_in_[k]), b_[k]);
                if (h.defined()) {
                    pre = ag::add(pre, ag::matmul(h, w_rec_[k]));
                }
                return pre;
            };
            ag::Tensor gi = ag::sigmoid(gate_pre(0));
            ag::Tensor gf = ag::sigmoid(gate_pre(1));
            ag::Tensor go = ag::sigmoid(gate_pre(2));
            ag::Tensor gg = ag::tanh(gate_pre(3));
            ag::Tensor c_new = ag::mul(gi, gg);
            if (c.defined()) {
                c_new = ag::add(c_new, ag::mul(gf, c));
            }
            c = c_new;
            h = ag::mul(go, ag::tanh(c));
        }
        Prediction pred;
        pred.position = ag::add(ag::matmul(h, w_out_), b_out_);
        if (config_.multi_task) {
            pred.class_logits = maybe_class_logits(h);
        }
        return pred;
    }

private:
    ag::Tensor w_in_[4], w_rec_[4], b_[4];
    ag::Tensor w_out_, b_out_;
};

class AttentionModel : public Model {
public:
    AttentionModel(ModelConfig cfg, Vocabulary vocab, uint64_t seed)
        : Model(std::move(cfg), std::move(vocab), seed) {
        const int in = config_.embedding_dim + 1;
        const int h = config_.hidden;
        query_ = add_param("attn.query", 1, in, 0.1);
        w1_ = add_linear_weight("attn.w1", in, h);
        b1_ = add_zero_bias("attn.b1", h);
        w2_ = add_linear_weight("attn.w2", h, h);
        b2_ = add_zero_bias("attn.b2", h);
        w3_ = add_linear_weight("attn.w3", h, 2);
        b3_ = add_zero_bias("attn.b3", 2);
        if (config_.multi_task) {
            class_w_ = add_linear_weight("attn.class_w", in, config_.num_classes);
            class_b_ = add_zero_bias("attn.class_b", config_.num_classes);
        }
    }

    Prediction forward(const Scan& scan) override {
        EncodedSet set = encode_set(scan, vocab_, emb_, fallback_seed_);
        // alpha_i = softmax_i(q . s_i); z = sum_i alpha_i s_i
        ag::Tensor scores = ag::matmul(query_, ag::transpose(set.rows));  // 1 x n
        ag::Tensor alpha = ag::softmax_rows(scores);
        ag::Tensor z = ag::matmul(alpha, set.rows);  // 1 x (d+1)
        ag::Tensor h1 = ag::relu(ag::add(ag::matmul(z, w1_), b1_));
        ag::Tensor h2 = ag::relu(ag::add(ag::matmul(h1, w2_), b2_));
        Prediction pred;
        pred.position = ag::add(ag::matmul(h2, w3_), b3_);
        if (config_.multi_task) {
            pred.class_logits = maybe_class_logits(z);
        }
        return pred;
    }

private:
    ag::Tensor query_, w1_, b1_, w2_, b2_, w3_, b3_;
};

class SetTransformerModel : public Model {
public:
    SetTransformerModel(ModelConfig cfg, Vocabulary vocab, uint64_t seed)
        : Model(std::move(cfg), std::move(vocab), seed) {
        const int in = config_.embedding_dim + 1;
        const int w = config_.hidden;
        w_in_ = add_linear_weight("st.w_in", in, w);
        b_in_ = add_zero_bias("st.b_in", w);
        for (int blk = 0; blk < config_.sab_blocks; ++blk) {
            sabs_.push_back(make_sab("st.sab" + std::to_string(blk), w));
        }
        pma_seed_ = add_param("st.pma.seed", 1, w, 0.1);
        pma_mha_ = make_mha("st.pma", w);
        pma_ln_g_ = add_param_values("st.pma.ln_g", 1, w, std::vector<double>(size_t(w), 1.0));
        pma_ln_b_ = add_zero_bias("st.pma.ln_b", w);
        head_w1_ = add_linear_weight("st.head_w1", w, config_.head_hidden);
        head_b1_ = add_zero_bias("st.head_b1", config_.head_hidden);
        head_w2_ = add_linear_weight("st.head_w2", config_.head_hidden, 2);
        head_b2_ = add_zero_bias("st.head_b2", 2);
        if (config_.multi_task) {
            class_w_ = add_linear_weight("st.class_w", w, config_.num_classes);
            class_b_ = add_zero_bias("st.class_b", config_.num_classes);
        }
    }

    Prediction forward(const Scan& scan) override {
        EncodedSet set = encode_set(scan, vocab_, emb_, fallback_seed_);
        ag::Tensor x = ag::add(ag::matmul(set.rows, w_in_), b_in_);  // n x w
        for (const auto& sab : sabs_) {
            x = apply_sab(sab, x);
        }
        // PMA: one learned seed attends over the processed set.
        ag::Tensor pooled = multihead(pma_mha_, pma_seed_, x);
        pooled = affine_ln(ag::layernorm_rows(ag::add(pma_seed_, pooled)), pma_ln_g_, pma_ln_b_);
        ag::Tensor h = ag::relu(ag::add(ag::matmul(pooled, head_w1_), head_b1_));
        Prediction pred;
        pred.position = ag::add(ag::matmul(h, head_w2_), head_b2_);
        if (config_.multi_task) {
            pred.class_logits = maybe_class_logits(pooled);
        }
        return pred;
    }

private:
    struct Mha {
        ag::Tensor w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o;
    };
    struct Sab {
        Mha mha;
        ag::Tensor ln1_g, ln1_b, ln2_g, ln2_b;
        ag::Tensor ff_w1, ff_b1, ff_w2, ff_b2;
    };

    Mha make_mha(const std::string& prefix, int w) {
        Mha m;
        m.w_q = add_linear_weight(prefix + ".w_q", w, w);
        m.b_q = add_zero_bias(prefix + ".b_q", w);
        m.w_k = add_linear_weight(prefix + ".w_k", w, w);
        m.b_k = add_zero_bias(prefix + ".b_k", w);
        m.w_v = add_linear_weight(prefix + ".w_v", w, w);
        m.b_v = add_zero_bias(prefix + ".b_v", w);
        m.w_o = add_linear_weight(prefix + ".w_o", w, w);
        m.b_o = add_zero_bias(prefix + ".b_o", w);
        return m;
    }

    Sab make_sab(const std::string& prefix, int w) {
        Sab s;
        s.mha = make_mha(prefix, w);
        s.ln1_g = add_param_values(prefix + ".ln1_g", 1, w, std::vector<double>(size_t(w), 1.0));
        s.ln1_b = add_zero_bias(prefix + ".ln1_b", w);
        s.ff_w1 = add_linear_weight(prefix + ".ff_w1", w, 2 * w);
        s.ff_b1 = add_zero_bias(prefix + ".ff_b1", 2 * w);
        s.ff_w2 = add_linear_weight(prefix + ".ff_w2", 2 * w, w);
        s.ff_b2 = add_zero_bias(prefix + ".ff_b2", w);
        s.ln2_g = add_param_values(prefix + ".ln2_g", 1, w, std::vector<double>(size_t(w), 1.0));
        s.ln2_b = add_zero_bias(prefix + ".ln2_b", w);
        return s;
    }

    static ag::Tensor affine_ln(const ag::Tensor& normed, const ag::Tensor& g,
                                const ag::Tensor& b) {
        return ag::add(ag::mul(normed, g), b);
    }

    // Scaled dot-product attention from queries_in to keys_in, per head.
    ag::Tensor multihead(const Mha& m, const ag::Tensor& queries_in,
                         const ag::Tensor& keys_in) {
        const int w = config_.hidden;
        const int heads = config_.heads;
        const int dh = w / heads;
        ag::Tensor q = ag::add(ag::matmul(queries_in, m.w_q), m.b_q);
        ag::Tensor k = ag::add(ag::matmul(keys_in, m.w_k), m.b_k);
        ag::Tensor v = ag::add(ag::matmul(keys_in, m.w_v), m.b_v);
        std::vector<ag::Tensor> outs;
        outs.reserve(size_t(heads));
        const double inv_sqrt = 1.0 / std::sqrt(double(dh));
        for (int hidx = 0; hidx < heads; ++hidx) {
            ag::Tensor qh = ag::slice_cols(q, hidx * dh, dh);
            ag::Tensor kh = ag::slice_cols(k, hidx * dh, dh);
            ag::Tensor vh = ag::slice_cols(v, hidx * dh, dh);
            ag::Tensor scores = ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt);
            ag::Tensor alpha = ag::softmax_rows(scores);
            outs.push_back(ag::matmul(alpha, vh));
        }
        ag::Tensor merged = heads == 1 ? outs[0] : ag::concat_cols(outs);
        return ag::add(ag::matmul(merged, m.w_o), m.b_o);
    }

    // Post-norm wiring: LN(x + MHA(x, x)), then LN(h + FF(h)).
    ag::Tensor apply_sab(const Sab& s, const ag::Tensor& x) {
        ag::Tensor attended = multihead(s.mha, x, x);
        ag::Tensor h = affine_ln(ag::layernorm_rows(ag::add(x, attended)), s.ln1_g, s.ln1_b);
        ag::Tensor ff = ag::add(
            ag::matmul(ag::relu(ag::add(ag::matmul(h, s.ff_w1), s.ff_b1)), s.ff_w2), s.ff_b2);
        return affine_ln(ag::layernorm_rows(ag::add(h, ff)), s.ln2_g, s.ln2_b);
    }

    ag::Tensor w_in_, b_in_;
    std::vector<Sab> sabs_;
    ag::Tensor pma_seed_;
    Mha pma_mha_;
    ag::Tensor pma_ln_g_, pma_ln_b_;
    ag::Tensor head_w1_, head_b1_, head_w2_, head_b2_;
};

}  // namespace

std::unique_ptr<Model> make_model(const ModelConfig& config, Vocabulary vocab,
                                  uint64_t init_seed) {
    ModelConfig cfg = config;
    if (cfg.hidden == 0) {
        cfg.hidden = ModelConfig::defaults(cfg.arch).hidden;
    }
    switch (cfg.arch) {
        case Arch::mlp:
            return std::make_unique<MlpModel>(std::move(cfg), std::move(vocab), init_seed);
        case Arch::rnn:
            return std::make_unique<RnnModel>(std::move(cfg), std::move(vocab), init_seed);
        case Arch::lstm:
            return std::make_unique<LstmModel>(std::move(cfg), std::move(vocab), init_seed);
        case Arch::attention:
            return std::make_unique<AttentionModel>(std::move(cfg), std::move(vocab), init_seed);
        case Arch::set_transformer:
            return std::make_unique<SetTransformerModel>(std::move(cfg), std::move(vocab),
                                                         init_seed);
    }
    throw std::invalid_argument("make_model: bad arch");
}

}  // namespace setloc
