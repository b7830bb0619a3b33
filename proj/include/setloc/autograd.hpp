#pragma once

// Dense 2-D tensors with reverse-mode automatic differentiation.
//
// The graph is rebuilt on every forward pass (define-by-run): each op
// returns a fresh node holding its output values, its parents, and a
// closure that propagates gradients. Storage and accumulation are both
// 64-bit. Single-threaded; tensors must not be shared across threads
// while a graph is being built or walked.

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace setloc::ag {

struct Node {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::string name;  // set for parameters, empty for intermediates
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    size_t numel() const { return values.size(); }
    void ensure_grad();
};

// Value-semantic handle onto a graph node. Copies share the node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(int rows, int cols, bool requires_grad = false);
    static Tensor from(std::vector<double> values, int rows, int cols,
                       bool requires_grad = false);
    static Tensor scalar(double v);
    // Leaf parameter initialized uniform(-scale, scale).
    static Tensor uniform(int rows, int cols, double scale, std::mt19937_64& rng,
                          std::string name = {});

    bool defined() const { return node_ != nullptr; }
    int rows() const { return node_->rows; }
    int cols() const { return node_->cols; }
    size_t numel() const { return node_->values.size(); }
    double at(int r, int c) const { return node_->values[size_t(r) * node_->cols + c]; }
    double item() const;  // scalar tensors only

    const std::vector<double>& values() const { return node_->values; }
    std::vector<double>& values_mut() { return node_->values; }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<double>& grad() const { return node_->grad; }
    std::vector<double>& grad_mut() { return node_->grad; }
    void zero_grad();

    const std::string& name() const { return node_->name; }
    void set_name(std::string name) { node_->name = std::move(name); }

    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& shared_node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// Accumulates d(loss)/d(leaf) into every requires_grad tensor reachable
// from `loss`. Gradients sum across calls until zero_grad.
void backward(const Tensor& loss);

// --- primitives -----------------------------------------------------------
// Binary elementwise ops accept equal shapes, or a 1xN second operand
// broadcast across the rows of an MxN first operand.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// Softmax along each row. Rows must be non-empty.
Tensor softmax_rows(const Tensor& a);
// Per-row standardization (x - mean) / sqrt(var + eps), no affine terms.
Tensor layernorm_rows(const Tensor& a, double eps = 1e-5);

Tensor transpose(const Tensor& a);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int first, int count);
Tensor slice_cols(const Tensor& a, int first, int count);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
// Mean of elementwise squared differences.
Tensor mse(const Tensor& a, const Tensor& b);

// Row gather from an embedding table. index[i] >= 0 selects table row
// index[i]; index[i] == -1 selects row i of `fallback`, which must not
// require gradients. Backward scatters only into the table.
Tensor embedding_rows(const Tensor& table, const std::vector<int>& index,
                      const Tensor& fallback);

// Numerically stable -log softmax(logits)[label] for a 1xC logits row.
Tensor cross_entropy_logits(const Tensor& logits, int label);

}  // namespace setloc::ag
