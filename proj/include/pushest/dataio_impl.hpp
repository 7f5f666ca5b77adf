#pragma once

#include <random>

namespace pushest {

template <typename Rng>
double sampleBimodalTriangular(Rng& rng, double mode, double halfWidth) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
  // Difference of two uniforms is triangular on [-1, 1].
  const double tri = unit(rng) - unit(rng);
  return sign * mode + halfWidth * tri;
}

}  // namespace pushest
