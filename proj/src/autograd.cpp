#include "setloc/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace setloc::ag {

namespace {

std::string shape_str(const Node& n) {
    std::ostringstream os;
    os << n.rows << "x" << n.cols;
    return os.str();
}

[[noreturn]] void shape_error(const std::string& op, const Node& a, const Node& b) {
    throw std::invalid_argument(op + ": incompatible shapes " + shape_str(a) + " and " +
                                shape_str(b));
}

std::shared_ptr<Node> make_node(int rows, int cols) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->values.assign(size_t(rows) * cols, 0.0);
    return n;
}

// Output node inheriting requires_grad from its parents.
Tensor make_op(int rows, int cols, std::vector<Tensor> parents,
               std::function<void(Node&)> backward_fn) {
    auto n = make_node(rows, cols);
    for (const auto& p : parents) {
        n->parents.push_back(p.shared_node());
        n->requires_grad = n->requires_grad || p.requires_grad();
    }
    if (n->requires_grad) {
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor(n);
}

bool row_broadcast(const Node& a, const Node& b) {
    return b.rows == 1 && b.cols == a.cols && a.rows > 1;
}

}  // namespace

void Node::ensure_grad() {
    if (grad.empty()) {
        grad.assign(values.size(), 0.0);
    }
}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
    if (rows <= 0 || cols <= 0) {
        throw std::invalid_argument("Tensor::zeros: dimensions must be positive");
    }
    auto n = make_node(rows, cols);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from(std::vector<double> values, int rows, int cols, bool requires_grad) {
    if (rows <= 0 || cols <= 0 || values.size() != size_t(rows) * cols) {
        throw std::invalid_argument("Tensor::from: value count does not match shape");
    }
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::scalar(double v) { return from({v}, 1, 1); }

Tensor Tensor::uniform(int rows, int cols, double scale, std::mt19937_64& rng,
                       std::string name) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    std::vector<double> v(size_t(rows) * cols);
    for (auto& x : v) {
        x = dist(rng);
    }
    Tensor t = from(std::move(v), rows, cols, true);
    t.set_name(std::move(name));
    return t;
}

double Tensor::item() const {
    if (numel() != 1) {
        throw std::invalid_argument("Tensor::item: tensor is not scalar (" +
                                    shape_str(*node_) + ")");
    }
    return node_->values[0];
}

void Tensor::zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw std::invalid_argument("backward: loss must be a defined scalar tensor");
    }
    if (!loss.requires_grad()) {
        return;  // nothing reachable to differentiate
    }

    // Iterative post-order DFS; recursion would overflow on long chains.
    std::vector<Node*> order;
    std::unordered_map<Node*, bool> visited;  // true once emitted
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child == 0 && visited.count(node)) {
            stack.pop_back();
            continue;
        }
        if (next_child < node->parents.size()) {
            Node* child = node->parents[next_child++].get();
            if (!visited.count(child) && child->requires_grad) {
                stack.emplace_back(child, 0);
            }
        } else {
            visited[node] = true;
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) {
            n->backward_fn(*n);
        }
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    Node* an = a.node();
    Node* bn = b.node();
    if (an->cols != bn->rows) {
        shape_error("matmul", *an, *bn);
    }
    const int m = an->rows, k = an->cols, n = bn->cols;
    Tensor out = make_op(m, n, {a, b}, [an, bn, m, k, n](Node& self) {
        const auto& g = self.grad;
        if (an->requires_grad) {
            an->ensure_grad();
            for (int i = 0; i < m; ++i) {
                for (int p = 0; p < n; ++p) {
                    const double gv = g[size_t(i) * n + p];
                    if (gv == 0.0) continue;
                    for (int j = 0; j < k; ++j) {
                        an->grad[size_t(i) * k + j] += gv * bn->values[size_t(j) * n + p];
                    }
                }
            }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int j = 0; j < k; ++j) {
                for (int p = 0; p < n; ++p) {
                    double acc = 0.0;
                    for (int i = 0; i < m; ++i) {
                        acc += an->values[size_t(i) * k + j] * g[size_t(i) * n + p];
                    }
                    bn->grad[size_t(j) * n + p] += acc;
                }
            }
        }
    });
    auto& ov = out.values_mut();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < k; ++j) {
            const double av = an->values[size_t(i) * k + j];
            if (av == 0.0) continue;
            for (int p = 0; p < n; ++p) {
                ov[size_t(i) * n + p] += av * bn->values[size_t(j) * n + p];
            }
        }
    }
    return out;
}

namespace {

enum class Pairwise { add, sub, mul };

Tensor pairwise_op(const char* opname, Pairwise op, const Tensor& a, const Tensor& b) {
    Node* an = a.node();
    Node* bn = b.node();
    const bool bcast = row_broadcast(*an, *bn);
    if (!bcast && (an->rows != bn->rows || an->cols != bn->cols)) {
        shape_error(opname, *an, *bn);
    }
    const int rows = an->rows, cols = an->cols;
    Tensor out = make_op(rows, cols, {a, b}, [an, bn, op, bcast, rows, cols](Node& self) {
        const auto& g = self.grad;
        if (an->requires_grad) {
            an->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) {
                const size_t bi = bcast ? i % cols : i;
                switch (op) {
                    case Pairwise::add: an->grad[i] += g[i]; break;
                    case Pairwise::sub: an->grad[i] += g[i]; break;
                    case Pairwise::mul: an->grad[i] += g[i] * bn->values[bi]; break;
                }
            }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) {
                const size_t bi = bcast ? i % cols : i;
                switch (op) {
                    case Pairwise::add: bn->grad[bi] += g[i]; break;
                    case Pairwise::sub: bn->grad[bi] -= g[i]; break;
                    case Pairwise::mul: bn->grad[bi] += g[i] * an->values[i]; break;
                }
            }
        }
        (void)rows;
    });
    auto& ov = out.values_mut();
    for (size_t i = 0; i < ov.size(); ++i) {
        const size_t bi = bcast ? i % cols : i;
        switch (op) {
            case Pairwise::add: ov[i] = an->values[i] + bn->values[bi]; break;
            case Pairwise::sub: ov[i] = an->values[i] - bn->values[bi]; break;
            case Pairwise::mul: ov[i] = an->values[i] * bn->values[bi]; break;
        }
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return pairwise_op("add", Pairwise::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return pairwise_op("sub", Pairwise::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return pairwise_op("mul", Pairwise::mul, a, b); }

Tensor scale(const Tensor& a, double c) {
    Node* an = a.node();
    Tensor out = make_op(an->rows, an->cols, {a}, [an, c](Node& self) {
        an->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
            an->grad[i] += c * self.grad[i];
        }
    });
    auto& ov = out.values_mut();
    for (size_t i = 0; i < ov.size(); ++i) {
        ov[i] = c * an->values[i];
    }
    return out;
}

namespace {

Tensor unary_op(const Tensor& a, double (*fwd)(double), double (*dfd)(double in, double out)) {
    Node* an = a.node();
    Tensor out = make_op(an->rows, an->cols, {a}, [an, dfd](Node& self) {
        an->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
            an->grad[i] += self.grad[i] * dfd(an->values[i], self.values[i]);
        }
    });
    auto& ov = out.values_mut();
    for (size_t i = 0; i < ov.size(); ++i) {
        ov[i] = fwd(an->values[i]);
    }
    return out;
}

}  // namespace

Tensor relu(const Tensor& a) {
    return unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor softmax_rows(const Tensor& a) {
    Node* an = a.node();
    if (an->cols < 1) {
        throw std::invalid_argument("softmax_rows: empty axis");
    }
    const int rows = an->rows, cols = an->cols;
    Tensor out = make_op(rows, cols, {a}, [an, rows, cols](Node& self) {
        an->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const double* y = self.values.data() + size_t(r) * cols;
            const double* gy = self.grad.data() + size_t(r) * cols;
            double dot = 0.0;
            for (int j = 0; j < cols; ++j) {
                dot += gy[j] * y[j];
            }
            double* gx = an->grad.data() + size_t(r) * cols;
            for (int j = 0; j < cols; ++j) {
                gx[j] += y[j] * (gy[j] - dot);
            }
        }
    });
    auto& ov = out.values_mut();
    for (int r = 0; r < rows; ++r) {
        const double* x = an->values.data() + size_t(r) * cols;
        double* y = ov.data() + size_t(r) * cols;
        double mx = x[0];
        for (int j = 1; j < cols; ++j) {
            mx = std::max(mx, x[j]);
        }
        double sum = 0.0;
        for (int j = 0; j < cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        for (int j = 0; j < cols; ++j) {
            y[j] /= sum;
        }
    }
    return out;
}

Tensor layernorm_rows(const Tensor& a, double eps) {
    Node* an = a.node();
    if (an->cols < 1) {
        throw std::invalid_argument("layernorm_rows: empty rows");
    }
    const int rows = an->rows, cols = an->cols;
    Tensor out = make_op(rows, cols, {a}, [an, rows, cols, eps](Node& self) {
        an->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const double* x = an->values.data() + size_t(r) * cols;
            const double* y = self.values.data() + size_t(r) * cols;
            const double* gy = self.grad.data() + size_t(r) * cols;
            double mean = 0.0;
            for (int j = 0; j < cols; ++j) {
                mean += x[j];
            }
            mean /= cols;
            double var = 0.0;
            for (int j = 0; j < cols; ++j) {
                var += (x[j] - mean) * (x[j] - mean);
            }
            var /= cols;
            const double rstd = 1.0 / std::sqrt(var + eps);
            double gmean = 0.0, gdot = 0.0;
            for (int j = 0; j < cols; ++j) {
                gmean += gy[j];
                gdot += gy[j] * y[j];
            }
            gmean /= cols;
            gdot /= cols;
            double* gx = an->grad.data() + size_t(r) * cols;
            for (int j = 0; j < cols; ++j) {
                gx[j] += (gy[j] - gmean - gdot * y[j]) * rstd;
            }
        }
    });
    auto& ov = out.values_mut();
    for (int r = 0; r < rows; ++r) {
        const double* x = an->values.data() + size_t(r) * cols;
        double* y = ov.data() + size_t(r) * cols;
        double mean = 0.0;
        for (int j = 0; j < cols; ++j) {
            mean += x[j];
        }
        mean /= cols;
        double var = 0.0;
        for (int j = 0; j < cols; ++j) {
            var += (x[j] - mean) * (x[j] - mean);
        }
        var /= cols;
        const double rstd = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < cols; ++j) {
            y[j] = (x[j] - mean) * rstd;
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    Node* an = a.node();
    const int rows = an->rows, cols = an->cols;
    Tensor out = make_op(cols, rows, {a}, [an, rows, cols](Node& self) {
        an->ensure_grad();
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) {
                an->grad[size_t(i) * cols + j] += self.grad[size_t(j) * rows + i];
            }
        }
    });
    auto& ov = out.values_mut();
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            ov[size_t(j) * rows + i] = an->values[size_t(i) * cols + j];
        }
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) {
        throw std::invalid_argument("concat_rows: no inputs");
    }
    const int cols = parts[0].cols();
    int rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) {
            shape_error("concat_rows", *parts[0].node(), *p.node());
        }
        rows += p.rows();
    }
    std::vector<Node*> nodes;
    for (const auto& p : parts) {
        nodes.push_back(p.node());
    }
    Tensor out = make_op(rows, cols, parts, [nodes, cols](Node& self) {
        size_t off = 0;
        for (Node* p : nodes) {
            const size_t n = p->values.size();
            if (p->requires_grad) {
                p->ensure_grad();
                for (size_t i = 0; i < n; ++i) {
                    p->grad[i] += self.grad[off + i];
                }
            }
            off += n;
        }
        (void)cols;
    });
    auto& ov = out.values_mut();
    size_t off = 0;
    for (const auto& p : parts) {
        const auto& pv = p.values();
        std::copy(pv.begin(), pv.end(), ov.begin() + off);
        off += pv.size();
    }
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) {
        throw std::invalid_argument("concat_cols: no inputs");
    }
    const int rows = parts[0].rows();
    int cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) {
            shape_error("concat_cols", *parts[0].node(), *p.node());
        }
        cols += p.cols();
    }
    std::vector<Node*> nodes;
    for (const auto& p : parts) {
        nodes.push_back(p.node());
    }
    Tensor out = make_op(rows, cols, parts, [nodes, rows, cols](Node& self) {
        int col0 = 0;
        for (Node* p : nodes) {
            if (p->requires_grad) {
                p->ensure_grad();
                for (int r = 0; r < rows; ++r) {
                    for (int j = 0; j < p->cols; ++j) {
                        p->grad[size_t(r) * p->cols + j] +=
                            self.grad[size_t(r) * cols + col0 + j];
                    }
                }
            }
            col0 += p->cols;
        }
    });
    auto& ov = out.values_mut();
    int col0 = 0;
    for (const auto& p : parts) {
        Node* pn = p.node();
        for (int r = 0; r < rows; ++r) {
            for (int j = 0; j < pn->cols; ++j) {
                ov[size_t(r) * cols + col0 + j] = pn->values[size_t(r) * pn->cols + j];
            }
        }
        col0 += pn->cols;
    }
    return out;
}

Tensor slice_rows(const Tensor& a, int first, int count) {
    Node* an = a.node();
    if (first < 0 || count < 1 || first + count > an->rows) {
        throw std::invalid_argument("slice_rows: range out of bounds");
    }
    const int cols = an->cols;
    Tensor out = make_op(count, cols, {a}, [an, first, cols](Node& self) {
        an->ensure_grad();
        const size_t base = size_t(first) * cols;
        for (size_t i = 0; i < self.grad.size(); ++i) {
            an->grad[base + i] += self.grad[i];
        }
    });
    auto& ov = out.values_mut();
    const size_t base = size_t(first) * cols;
    std::copy(an->values.begin() + base, an->values.begin() + base + ov.size(), ov.begin());
    return out;
}

Tensor slice_cols(const Tensor& a, int first, int count) {
    Node* an = a.node();
    if (first < 0 || count < 1 || first + count > an->cols) {
        throw std::invalid_argument("slice_cols: range out of bounds");
    }
    const int rows = an->rows, cols = an->cols;
    Tensor out = make_op(rows, count, {a}, [an, first, rows, cols, count](Node& self) {
        an->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            for (int j = 0; j < count; ++j) {
                an->grad[size_t(r) * cols + first + j] += self.grad[size_t(r) * count + j];
            }
        }
    });
    auto& ov = out.values_mut();
    for (int r = 0; r < rows; ++r) {
        for (int j = 0; j < count; ++j) {
            ov[size_t(r) * count + j] = an->values[size_t(r) * cols + first + j];
        }
    }
    return out;
}

Tensor sum_all(const Tensor& a) {
    Node* an = a.node();
    Tensor out = make_op(1, 1, {a}, [an](Node& self) {
        an->ensure_grad();
        const double g = self.grad[0];
        for (auto& gv : an->grad) {
            gv += g;
        }
    });
    double acc = 0.0;
    for (double v : an->values) {
        acc += v;
    }
    out.values_mut()[0] = acc;
    return out;
}

Tensor mean_all(const Tensor& a) {
    Node* an = a.node();
    const double inv = 1.0 / double(an->values.size());
    Tensor out = make_op(1, 1, {a}, [an, inv](Node& self) {
        an->ensure_grad();
        const double g = self.grad[0] * inv;
        for (auto& gv : an->grad) {
            gv += g;
        }
    });
    double acc = 0.0;
    for (double v : an->values) {
        acc += v;
    }
    out.values_mut()[0] = acc * inv;
    return out;
}

Tensor mse(const Tensor& a, const Tensor& b) {
    Node* an = a.node();
    Node* bn = b.node();
    if (an->rows != bn->rows || an->cols != bn->cols) {
        shape_error("mse", *an, *bn);
    }
    const double inv = 1.0 / double(an->values.size());
    Tensor out = make_op(1, 1, {a, b}, [an, bn, inv](Node& self) {
        const double g = self.grad[0] * inv * 2.0;
        if (an->requires_grad) {
            an->ensure_grad();
            for (size_t i = 0; i < an->values.size(); ++i) {
                an->grad[i] += g * (an->values[i] - bn->values[i]);
            }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < bn->values.size(); ++i) {
                bn->grad[i] -= g * (an->values[i] - bn->values[i]);
            }
        }
    });
    double acc = 0.0;
    for (size_t i = 0; i < an->values.size(); ++i) {
        const double d = an->values[i] - bn->values[i];
        acc += d * d;
    }
    out.values_mut()[0] = acc * inv;
    return out;
}

Tensor embedding_rows(const Tensor& table, const std::vector<int>& index,
                      const Tensor& fallback) {
    Node* tn = table.node();
    Node* fn = fallback.node();
    const int n = int(index.size());
    const int dim = tn->cols;
    if (n < 1) {
        throw std::invalid_argument("embedding_rows: empty index list");
    }
    if (fn->rows != n || fn->cols != dim) {
        shape_error("embedding_rows", *tn, *fn);
    }
    if (fn->requires_grad) {
        throw std::invalid_argument("embedding_rows: fallback rows must not require grad");
    }
    for (int idx : index) {
        if (idx < -1 || idx >= tn->rows) {
            throw std::invalid_argument("embedding_rows: index out of range");
        }
    }
    auto idx_copy = index;
    Tensor out = make_op(n, dim, {table, fallback},
                         [tn, idx_copy = std::move(idx_copy), dim](Node& self) {
                             if (!tn->requires_grad) return;
                             tn->ensure_grad();
                             for (size_t i = 0; i < idx_copy.size(); ++i) {
                                 const int idx = idx_copy[i];
                                 if (idx < 0) continue;
                                 for (int j = 0; j < dim; ++j) {
                                     tn->grad[size_t(idx) * dim + j] +=
                                         self.grad[i * dim + j];
                                 }
                             }
                         });
    auto& ov = out.values_mut();
    for (int i = 0; i < n; ++i) {
        const double* src = index[i] >= 0 ? tn->values.data() + size_t(index[i]) * dim
                                          : fn->values.data() + size_t(i) * dim;
        std::copy(src, src + dim, ov.begin() + size_t(i) * dim);
    }
    return out;
}

Tensor cross_entropy_logits(const Tensor& logits, int label) {
    Node* ln = logits.node();
    if (ln->rows != 1 || ln->cols < 1) {
        throw std::invalid_argument("cross_entropy_logits: logits must be a 1xC row");
    }
    if (label < 0 || label >= ln->cols) {
        throw std::invalid_argument("cross_entropy_logits: label " + std::to_string(label) +
                                    " outside [0, " + std::to_string(ln->cols) + ")");
    }
    const int c = ln->cols;
    Tensor out = make_op(1, 1, {logits}, [ln, label, c](Node& self) {
        ln->ensure_grad();
        const double g = self.grad[0];
        double mx = ln->values[0];
        for (int j = 1; j < c; ++j) {
            mx = std::max(mx, ln->values[j]);
        }
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            sum += std::exp(ln->values[j] - mx);
        }
        for (int j = 0; j < c; ++j) {
            const double p = std::exp(ln->values[j] - mx) / sum;
            ln->grad[j] += g * (p - (j == label ? 1.0 : 0.0));
        }
    });
    double mx = ln->values[0];
    for (int j = 1; j < c; ++j) {
        mx = std::max(mx, ln->values[j]);
    }
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
        sum += std::exp(ln->values[j] - mx);
    }
    out.values_mut()[0] = std::log(sum) + mx - ln->values[label];
    return out;
}

}  // namespace setloc::ag
