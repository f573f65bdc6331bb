#include "twopass/gates.hpp"

#include <cmath>

namespace twopass {

namespace {

// Times and thresholds live on a 0.1 s / integer grid; floating-point noise
// from window arithmetic (e.g. 7.3 - 7.0) must not flip a comparison whose
// decimal operands are exactly equal. Distances within this tolerance of the
// threshold count as equal.
constexpr double kBoundaryTol = 1e-9;

}  // namespace

TimeDecision gate1_temporal(double t1, const Pass2Result& fine, double w_min,
                            double w_max, double tau) {
  const double t2 = fine.t2;
  // strict <: a distance exactly equal to tau is not a hedge
  const bool hedged = t2 < 0.0 || std::fabs(t2 - w_min) < tau - kBoundaryTol ||
                      std::fabs(t2 - w_max) < tau - kBoundaryTol;
  if (hedged) return {t1, Source::Pass1};
  return {t2, Source::Pass2};
}

SpaceDecision gate2_spatial(double raw_x1, double raw_y1, double raw_x2,
                            double raw_y2, double margin) {
  if (margin == 0.0) {
    return {{raw_x2 / 1000.0, raw_y2 / 1000.0}, Source::Pass2};
  }
  // inclusive bounds: coordinates exactly at the margin are accepted
  const double lo = margin - kBoundaryTol;
  const double hi = 1000.0 - margin + kBoundaryTol;
  const bool inside = lo <= raw_x2 && raw_x2 <= hi && lo <= raw_y2 && raw_y2 <= hi;
  if (inside) return {{raw_x2 / 1000.0, raw_y2 / 1000.0}, Source::Pass2};
  return {{raw_x1 / 1000.0, raw_y1 / 1000.0}, Source::Pass1};
}

}  // namespace twopass
