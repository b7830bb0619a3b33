#pragma once

// Adam with bias correction, classic (non-amsgrad) rule.

#include <vector>

#include "setloc/autograd.hpp"

namespace setloc {

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    // First/second moment buffers, one per parameter, mirroring its shape.
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

AdamState make_adam(const std::vector<ag::Tensor>& params, double lr = 1e-3);

// One bias-corrected update over all parameters. Gradients are read, not
// cleared; the caller zeroes them. Throws if any parameter lacks a gradient.
void adam_step(std::vector<ag::Tensor>& params, AdamState& state);

}  // namespace setloc
