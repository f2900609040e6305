#include "hlab/moduli.hpp"

#include <cmath>

namespace hlab {

namespace {
// Largest double strictly below 2^64.
constexpr double kIndexCeiling = 18446744073709549568.0;
}  // namespace

Index ceil_index(double x) noexcept {
  if (!(x > 0.0)) return 0;
  const double c = std::ceil(x);
  if (c >= kIndexCeiling) return kIndexMax;
  return static_cast<Index>(c);
}

Index floor_index(double x) noexcept {
  if (!(x > 0.0)) return 0;
  const double f = std::floor(x);
  if (f >= kIndexCeiling) return kIndexMax;
  return static_cast<Index>(f);
}

Index sat_add(Index a, Index b) noexcept { return a > kIndexMax - b ? kIndexMax : a + b; }

Index sat_sub(Index a, Index b) noexcept { return a > b ? a - b : 0; }

}  // namespace hlab
