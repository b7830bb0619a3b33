#pragma once

// The five scan -> position architectures behind one prediction contract:
// fixed-vector MLP, RNN and LSTM over RSSI-sorted sequences, single-query
// attention pooling, and a Set Transformer (SAB blocks + single-seed PMA).
// Any of them can carry an auxiliary domain-classification head.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "setloc/autograd.hpp"
#include "setloc/dataset.hpp"
#include "setloc/encoding.hpp"
#include "setloc/scan.hpp"

namespace setloc {

enum class Arch { mlp, rnn, lstm, attention, set_transformer };

Arch arch_from_string(const std::string& s);
std::string to_string(Arch arch);
const std::vector<std::string>& arch_names();

struct ModelConfig {
    Arch arch = Arch::set_transformer;
    int embedding_dim = 16;
    // Width of the architecture's main hidden state: recurrent state for
    // rnn/lstm, hidden layers for mlp/attention, model width for the Set
    // Transformer. Defaults differ per arch to keep total parameter counts
    // within the same capacity band.
    int hidden = 0;
    int sab_blocks = 2;
    int heads = 4;
    int head_hidden = 64;  // width of the regression head after pooling
    bool multi_task = false;
    int num_classes = 0;

    static ModelConfig defaults(Arch arch);
    void validate() const;
};

struct Prediction {
    ag::Tensor position;                      // 1x2, normalized coordinates
    std::optional<ag::Tensor> class_logits;   // 1xC when multi-task
};

class Model {
public:
    Model(ModelConfig config, Vocabulary vocab, uint64_t init_seed);
    virtual ~Model() = default;

    virtual Prediction forward(const Scan& scan) = 0;

    const ModelConfig& config() const { return config_; }
    const Vocabulary& vocabulary() const { return vocab_; }
    uint64_t init_seed() const { return init_seed_; }
    uint64_t fallback_seed() const { return fallback_seed_; }

    std::vector<ag::Tensor>& parameters() { return params_; }
    const std::vector<ag::Tensor>& parameters() const { return params_; }
    size_t parameter_count() const;
    void zero_grad();

    // Task metadata for the classification head; stored with checkpoints.
    void set_task_labels(ClassField field, std::vector<std::string> labels);
    ClassField class_field() const { return class_field_; }
    const std::vector<std::string>& class_labels() const { return class_labels_; }

    std::vector<std::vector<double>> snapshot_weights() const;
    void restore_weights(const std::vector<std::vector<double>>& snapshot);

protected:
    ag::Tensor add_param(const std::string& name, int rows, int cols, double scale);
    ag::Tensor add_param_values(const std::string& name, int rows, int cols,
                                std::vector<double> values);
    // Linear-layer init scale 1/sqrt(fan_in).
    ag::Tensor add_linear_weight(const std::string& name, int in_dim, int out_dim);
    ag::Tensor add_zero_bias(const std::string& name, int dim);
    ag::Tensor maybe_class_logits(const ag::Tensor& pooled);

    ModelConfig config_;
    Vocabulary vocab_;
    EmbeddingTable emb_;  // unused by the MLP
    uint64_t init_seed_ = 0;
    uint64_t fallback_seed_ = 0;
    std::mt19937_64 rng_;
    std::vector<ag::Tensor> params_;
    ClassField class_field_ = ClassField::none;
    std::vector<std::string> class_labels_;
    ag::Tensor class_w_;
    ag::Tensor class_b_;
};

std::unique_ptr<Model> make_model(const ModelConfig& config, Vocabulary vocab,
                                  uint64_t init_seed);

}  // namespace setloc
