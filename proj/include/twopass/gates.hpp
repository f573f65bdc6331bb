#pragma once

#include "twopass/parser.hpp"
#include "twopass/types.hpp"

namespace twopass {

enum class Source { Pass1, Pass2 };

struct TimeDecision {
  double t_star = 0.0;
  Source source = Source::Pass1;
};

struct SpaceDecision {
  NormPoint point;
  Source source = Source::Pass1;
};

// Temporal fallback. Keeps the coarse time when the fine pass declined
// (t2 < 0) or returned a time strictly within `tau` of either window edge;
// otherwise accepts the fine time. Boundary tolerance applies even when the
// window is clamped at 0 or the clip end.
TimeDecision gate1_temporal(double t1, const Pass2Result& fine, double w_min,
                            double w_max, double tau);

// Spatial merge on the raw [0,1000] grid. With margin > 0 the fine point is
// accepted only when both coordinates lie inside [margin, 1000-margin]
// (inclusive); otherwise the coarse point wins. margin == 0 disables the
// check entirely and the fine point is always taken. Output is divided by
// 1000 either way.
SpaceDecision gate2_spatial(double raw_x1, double raw_y1, double raw_x2,
                            double raw_y2, double margin);

}  // namespace twopass
