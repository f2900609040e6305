#pragma once

#include <cstdint>
#include <functional>
#include <limits>

namespace hlab {

// Iteration index. Huge real-valued formulas saturate at kIndexMax.
using Index = std::uint64_t;
inline constexpr Index kIndexMax = std::numeric_limits<Index>::max();

// ceil(x) as an Index: 0 for x <= 0 (and NaN), kIndexMax on overflow.
Index ceil_index(double x) noexcept;
// floor(x) as an Index, same saturation rules.
Index floor_index(double x) noexcept;
Index sat_add(Index a, Index b) noexcept;
// a - b clamped at 0.
Index sat_sub(Index a, Index b) noexcept;

// eps -> N. Used for rates of convergence of sequences and series.
using ConvergenceModulus = std::function<Index(double)>;
// (k, b) -> N with sum_{n=k}^{N} a_n >= b.
using DivergenceModulus = std::function<Index(Index, double)>;
// eps -> delta, for moduli of uniform integrability / absolute continuity.
using RealModulus = std::function<double(double)>;

}  // namespace hlab
