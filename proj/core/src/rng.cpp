// SPDX-License-Identifier: Apache-2.0
#include "rollmini/rng.hpp"

#include <cmath>

namespace rollmini::rng {

double Stream::next_gaussian() {
  // Box-Muller; u1 nudged away from zero so log() stays finite.
  double u1 = next_double();
  double u2 = next_double();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace rollmini::rng
