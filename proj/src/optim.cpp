#include "g2dm/optim.hpp"

#include <stdexcept>

namespace g2dm {

double warmup_lr(long iteration, long nw, double base_lr, double floor_ratio) {
    if (iteration < 0) throw std::invalid_argument("warmup_lr: negative iteration");
    if (nw < 1) throw std::invalid_argument("warmup_lr: nw must be >= 1");
    if (floor_ratio <= 0.0 || floor_ratio > 1.0) {
        throw std::invalid_argument("warmup_lr: floor_ratio must be in (0,1]");
    }
    if (iteration >= nw) return base_lr;
    const double t = static_cast<double>(iteration) / static_cast<double>(nw);
    return base_lr * (floor_ratio + (1.0 - floor_ratio) * t);
}

void SgdMomentum::step(std::vector<Tensor*> params, const std::vector<Tensor>& grads, double lr) {
    if (params.size() != grads.size()) {
        throw DimensionError("optimizer step: parameter/gradient count mismatch");
    }
    if (state_.velocity.size() < params.size()) {
        for (std::size_t i = state_.velocity.size(); i < params.size(); ++i) {
            state_.velocity.push_back(Tensor::zeros(params[i]->shape));
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        Tensor& v = state_.velocity[i];
        if (!p.same_shape(g) || !p.same_shape(v)) {
            throw DimensionError("optimizer step: shape mismatch at parameter " +
                                 std::to_string(i));
        }
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double grad = g.values[j] + weight_decay_ * p.values[j];
            v.values[j] = momentum_ * v.values[j] - lr * grad;
            p.values[j] += v.values[j];
        }
    }
    ++state_.iteration;
}

void SgdMomentum::plateau_decay(double epoch_metric, int patience, double factor) {
    if (patience < 1) throw std::invalid_argument("plateau_decay: patience must be >= 1");
    if (factor <= 0.0 || factor >= 1.0) {
        throw std::invalid_argument("plateau_decay: factor must be in (0,1)");
    }
    if (epoch_metric < state_.best_metric) {
        state_.best_metric = epoch_metric;
        state_.plateau_count = 0;
        return;
    }
    if (++state_.plateau_count >= patience) {
        state_.lr *= factor;
        state_.plateau_count = 0;
    }
}

}  // namespace g2dm
