#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "g2dm/tensor.hpp"

namespace g2dm {

// Linear learning rate warm-up: floor_ratio*base_lr at iteration 0, ramping
// to base_lr at iteration >= nw.
double warmup_lr(long iteration, long nw, double base_lr, double floor_ratio);

// Heavy-ball SGD state plus the plateau schedule bookkeeping for one group of
// parameters.
struct OptimState {
    std::vector<Tensor> velocity;  // mirrors parameter shapes
    long iteration = 0;
    double lr = 0.0;
    int plateau_count = 0;
    double best_metric = std::numeric_limits<double>::infinity();
};

// v <- momentum*v - lr*g ; theta <- theta + v. Weight decay enters as an L2
// term added to the gradient. Velocity buffers are created lazily on first
// use, matched by position.
class SgdMomentum {
  public:
    SgdMomentum(double momentum, double weight_decay)
        : momentum_(momentum), weight_decay_(weight_decay) {}

    void step(std::vector<Tensor*> params, const std::vector<Tensor>& grads, double lr);

    OptimState& state() { return state_; }
    const OptimState& state() const { return state_; }

    // Plateau decay on a lower-is-better metric: after `patience` consecutive
    // non-improving calls, lr <- lr*factor and the counter resets.
    void plateau_decay(double epoch_metric, int patience, double factor);

  private:
    double momentum_;
    double weight_decay_;
    OptimState state_;
};

}  // namespace g2dm
