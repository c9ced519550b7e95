#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "maskgae/dense.hpp"

namespace maskgae::num {

struct AdamConfig {
    double lr{0.01};
    double beta1{0.9};
    double beta2{0.999};
    double eps{1e-8};
    double weight_decay{0.0};
};

// Bias-corrected Adam over a fixed set of tensors. Slot order is established
// on the first step and must stay aligned with the parameter list.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    // params[i] is updated in place using grads[i]. Shapes must match.
    void step(std::span<DenseMatrix* const> params, std::span<const DenseMatrix* const> grads);

    std::int64_t steps_taken() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::int64_t t_{0};
    std::vector<std::vector<float>> m_, v_;
};

} // namespace maskgae::num
