#pragma once

#include <array>

namespace crackmc {

/// Axis-aligned box in 1, 2, or 3 dimensions.  Unused coordinates stay 0.
struct Box {
  int dim = 2;
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};

  /// Throws ConfigError unless 1 <= dim <= 3 and lo < hi on every used axis.
  void validate() const;

  double extent(int axis) const { return hi[axis] - lo[axis]; }
  double measure() const;
  bool contains(const std::array<double, 3>& x) const;
};

}  // namespace crackmc
