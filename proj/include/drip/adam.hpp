#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "drip/errors.hpp"
#include "drip/param_store.hpp"

namespace drip {

// Bias-corrected Adam over every parameter of a store, in registration order.
class AdamState {
public:
    AdamState(ParamStore& store, double lr, double weight_decay = 0.0,
              double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (Param* p : store.params()) {
            m_.emplace_back(p->size(), 0.0);
            v_.emplace_back(p->size(), 0.0);
        }
    }

    void step(ParamStore& store) {
        auto params = store.params();
        if (params.size() != m_.size()) throw DripError("adam: store changed size");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            Param* p = params[i];
            for (std::size_t j = 0; j < p->size(); ++j) {
                double g = p->grad[j];
                if (!std::isfinite(g))
                    throw NumericalFault("adam: non-finite gradient in " + p->name);
                if (wd_ != 0.0) g += wd_ * p->value[j];
                m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
                v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
                const double mhat = m_[i][j] / bc1;
                const double vhat = v_[i][j] / bc2;
                p->value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    long step_count() const { return t_; }
    double learning_rate() const { return lr_; }

private:
    double lr_, wd_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace drip
