#include "maskgae/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace maskgae::num {

void Adam::step(std::span<DenseMatrix* const> params, std::span<const DenseMatrix* const> grads) {
    if (params.size() != grads.size())
        throw std::invalid_argument("Adam::step: parameter/gradient count mismatch");
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(static_cast<std::size_t>(params[i]->size()), 0.0f);
            v_[i].assign(static_cast<std::size_t>(params[i]->size()), 0.0f);
        }
    } else if (m_.size() != params.size()) {
        throw std::invalid_argument("Adam::step: parameter set changed between steps");
    }

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

    for (std::size_t i = 0; i < params.size(); ++i) {
        DenseMatrix& p = *params[i];
        const DenseMatrix& g = *grads[i];
        if (!p.same_shape(g))
            throw std::invalid_argument("Adam::step: shape mismatch at slot " + std::to_string(i) +
                                        " (" + p.shape_str() + " vs " + g.shape_str() + ")");
        if (m_[i].size() != static_cast<std::size_t>(p.size()))
            throw std::invalid_argument("Adam::step: slot size changed between steps");
        for (std::size_t k = 0; k < m_[i].size(); ++k) {
            double gk = static_cast<double>(g.data[k]);
            if (cfg_.weight_decay != 0.0) gk += cfg_.weight_decay * static_cast<double>(p.data[k]);
            const double m = cfg_.beta1 * static_cast<double>(m_[i][k]) + (1.0 - cfg_.beta1) * gk;
            const double v = cfg_.beta2 * static_cast<double>(v_[i][k]) + (1.0 - cfg_.beta2) * gk * gk;
            m_[i][k] = static_cast<float>(m);
            v_[i][k] = static_cast<float>(v);
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            p.data[k] = static_cast<float>(static_cast<double>(p.data[k]) -
                                           cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
        }
    }
}

} // namespace maskgae::num
