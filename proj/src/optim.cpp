#include "setloc/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace setloc {

AdamState make_adam(const std::vector<ag::Tensor>& params, double lr) {
    AdamState st;
    st.lr = lr;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const auto& p : params) {
        st.m.emplace_back(p.numel(), 0.0);
        st.v.emplace_back(p.numel(), 0.0);
    }
    return st;
}

void adam_step(std::vector<ag::Tensor>& params, AdamState& state) {
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::runtime_error("adam_step: state does not match parameter list");
    }
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) {
            const std::string& name = params[i].name();
            throw std::runtime_error("adam_step: parameter '" +
                                     (name.empty() ? "#" + std::to_string(i) : name) +
                                     "' has no gradient");
        }
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& vals = params[i].values_mut();
        const auto& grad = params[i].grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < vals.size(); ++j) {
            const double g = grad[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            vals[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace setloc
