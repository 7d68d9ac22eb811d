#ifndef VFSCORE_NUMERICS_OPTIMIZER_HPP_
#define VFSCORE_NUMERICS_OPTIMIZER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "vfscore/numerics/tensor.hpp"

namespace vfscore::numerics {

enum class OptimizerMode {
  kGradientDescent,  // p <- p - lr * g
  kAdaptive,         // bias-corrected first/second moment update
};

OptimizerMode optimizer_mode_from_string(const std::string& s);
std::string to_string(OptimizerMode mode);

struct OptimizerConfig {
  OptimizerMode mode = OptimizerMode::kAdaptive;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First-order optimizer state over a fixed, ordered parameter list. Moment
// accumulators are allocated on the first step and must keep matching the
// parameter shapes afterwards. Deterministic: the update is a pure function
// of (state, params, grads).
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) {}

  // Applies one update in place. Throws ShapeError if params/grads disagree
  // and DivergenceError if any gradient entry is non-finite.
  void step(const std::vector<Tensor*>& params,
            const std::vector<Tensor>& grads);

  std::uint64_t step_count() const { return step_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
  std::uint64_t step_ = 0;
};

}  // namespace vfscore::numerics

#endif  // VFSCORE_NUMERICS_OPTIMIZER_HPP_
