#include "vfscore/numerics/optimizer.hpp"

#include <cmath>

#include "vfscore/common/errors.hpp"

namespace vfscore::numerics {

OptimizerMode optimizer_mode_from_string(const std::string& s) {
  if (s == "sgd" || s == "gradient-descent") {
    return OptimizerMode::kGradientDescent;
  }
  if (s == "adam" || s == "adaptive") return OptimizerMode::kAdaptive;
  throw ConfigError("unknown optimizer mode '" + s + "'");
}

std::string to_string(OptimizerMode mode) {
  return mode == OptimizerMode::kGradientDescent ? "sgd" : "adam";
}

void Optimizer::step(const std::vector<Tensor*>& params,
                     const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("optimizer got " + std::to_string(params.size()) +
                     " params and " + std::to_string(grads.size()) + " grads");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p]->same_shape(grads[p])) {
      throw ShapeError("param " + std::to_string(p) + " shape " +
                       params[p]->shape_str() + " vs grad " +
                       grads[p].shape_str());
    }
    if (!grads[p].all_finite()) {
      throw DivergenceError("non-finite gradient for parameter " +
                            std::to_string(p));
    }
  }
  if (first_moment_.empty() && config_.mode == OptimizerMode::kAdaptive) {
    for (const Tensor* p : params) {
      first_moment_.emplace_back(p->shape());
      second_moment_.emplace_back(p->shape());
    }
  }
  ++step_;
  const double lr = config_.learning_rate;
  if (config_.mode == OptimizerMode::kGradientDescent) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      Tensor& w = *params[p];
      const Tensor& g = grads[p];
      for (std::size_t i = 0; i < w.size(); ++i) w.at(i) -= lr * g.at(i);
    }
    return;
  }
  if (first_moment_.size() != params.size()) {
    throw ShapeError("optimizer state tracks a different parameter list");
  }
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    Tensor& m = first_moment_[p];
    Tensor& v = second_moment_[p];
    const Tensor& g = grads[p];
    if (!m.same_shape(w)) {
      throw ShapeError("optimizer state shape drifted for parameter " +
                       std::to_string(p));
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m.at(i) = config_.beta1 * m.at(i) + (1.0 - config_.beta1) * g.at(i);
      v.at(i) = config_.beta2 * v.at(i) + (1.0 - config_.beta2) * g.at(i) * g.at(i);
      const double m_hat = m.at(i) / c1;
      const double v_hat = v.at(i) / c2;
      w.at(i) -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

}  // namespace vfscore::numerics
