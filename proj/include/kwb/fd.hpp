#pragma once

#include <functional>
#include <span>

#include "kwb/jet.hpp"

namespace kwb {

using ScalarFunction = std::function<double(std::span<const double>)>;

inline constexpr double kDefaultFdStep = 1e-4;

/// Central-difference estimate of the mixed partial derivative `idx` of `fn` at
/// `point`, with one level of Richardson extrapolation (steps h and h/2).
///
/// Each variable uses the symmetric O(h^2) stencil of its exponent, so the
/// product stencil has an even error expansion and the extrapolated value is
/// O(h^4) accurate. Roundoff grows like eps / h^degree: higher degrees want a
/// larger step (about 1e-3 for degree 2, 1e-2 for degree 3).
///
/// Throws OrderOverflow for degree > 3 and NonFinite if any sample is not finite.
double fd_partial(const ScalarFunction& fn, std::span<const double> point, const MultiIndex& idx,
                  double step = kDefaultFdStep);

}  // namespace kwb
