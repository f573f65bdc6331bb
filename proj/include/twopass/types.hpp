#pragma once

#include <string>

namespace twopass {

// One benchmark clip. `path` is either a media file (command extractor) or a
// directory of per-second images (directory extractor).
struct VideoRecord {
  std::string id;
  std::string path;
  double duration = 0.0;  // seconds
  int width = 0;
  int height = 0;
};

// Point in normalized [0,1]^2 image coordinates, origin top-left.
struct NormPoint {
  double x = 0.0;
  double y = 0.0;
};

// Axis-aligned rectangle in normalized coordinates.
struct NormRect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
};

}  // namespace twopass
