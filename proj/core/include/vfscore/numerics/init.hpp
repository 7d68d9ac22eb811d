#ifndef VFSCORE_NUMERICS_INIT_HPP_
#define VFSCORE_NUMERICS_INIT_HPP_

#include <cmath>

#include "vfscore/common/rng.hpp"
#include "vfscore/numerics/tensor.hpp"

namespace vfscore::numerics {

// Scaled-uniform initialization: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline Tensor scaled_uniform(Rng& rng, std::size_t rows, std::size_t cols) {
  const double a =
      std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t({rows, cols});
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(-a, a);
  return t;
}

// Scaled-uniform vector treated as fan_in = n, fan_out = 1.
inline Tensor scaled_uniform_vec(Rng& rng, std::size_t n) {
  const double a = std::sqrt(6.0 / static_cast<double>(n + 1));
  Tensor t({n});
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(-a, a);
  return t;
}

}  // namespace vfscore::numerics

#endif  // VFSCORE_NUMERICS_INIT_HPP_
