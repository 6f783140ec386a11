#include "crackmc/geometry.hpp"

#include <cmath>
#include <string>

#include "crackmc/errors.hpp"

namespace crackmc {

void Box::validate() const {
  if (dim < 1 || dim > 3)
    throw ConfigError("box: dimension must be 1, 2, or 3, got " +
                      std::to_string(dim));
  for (int k = 0; k < dim; ++k) {
    if (!std::isfinite(lo[k]) || !std::isfinite(hi[k]) || !(hi[k] > lo[k]))
      throw ConfigError("box: need lo < hi on axis " + std::to_string(k));
  }
}

double Box::measure() const {
  double m = 1.0;
  for (int k = 0; k < dim; ++k) m *= extent(k);
  return m;
}

bool Box::contains(const std::array<double, 3>& x) const {
  for (int k = 0; k < dim; ++k)
    if (x[k] < lo[k] || x[k] > hi[k]) return false;
  return true;
}

}  // namespace crackmc
