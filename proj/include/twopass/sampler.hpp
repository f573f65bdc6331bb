#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "twopass/config.hpp"
#include "twopass/types.hpp"
#include "twopass/util.hpp"

namespace twopass {

enum class PassKind { Coarse, Fine, TypeClip };

std::string to_string(PassKind k);

// Concrete frame-extraction plan: which seconds to pull, at what resolution,
// with an optional crop. Coarse plans cover the whole clip at 1 fps, fine
// plans the refinement window at 5 fps, type clips a short span around the
// merged time.
struct SamplingPlan {
  PassKind pass_kind = PassKind::Coarse;
  std::vector<double> timestamps;  // strictly increasing, within [0, duration]
  int long_edge_px = 720;
  std::optional<NormRect> crop;
  double window_min = 0.0;
  double window_max = 0.0;

  void validate(double duration) const;  // throws InputError on violations
};

struct Frame {
  double timestamp = 0.0;  // the plan's label, even when a neighbor frame was substituted
  std::string bytes;       // encoded image
  int width = 0;
  int height = 0;
};

struct FrameSet {
  std::vector<Frame> frames;
};

SamplingPlan build_pass1_plan(const VideoRecord& video, const RunConfig& cfg);
SamplingPlan build_pass2_plan(const VideoRecord& video, double t1, const RunConfig& cfg);
SamplingPlan build_type_clip_plan(const VideoRecord& video, double t_star,
                                  NormPoint center, const RunConfig& cfg);

// Fetches encoded image bytes for one plan timestamp. Implementations must be
// safe to call concurrently for distinct videos.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual Outcome<std::string> fetch(const VideoRecord& video, double timestamp,
                                     int long_edge_px,
                                     const std::optional<NormRect>& crop) = 0;
};

// Reads `<seconds>.jpg` (or .png) files from a directory; a timestamp with no
// exact file takes the nearest earlier one. Lets the whole pipeline run
// without any media decoder.
class DirectoryFrameSource : public FrameSource {
 public:
  Outcome<std::string> fetch(const VideoRecord& video, double timestamp,
                             int long_edge_px,
                             const std::optional<NormRect>& crop) override;
};

// Shells out to a decoder command template with {input}, {timestamp},
// {long_edge} and {crop} placeholders; the command writes the encoded frame
// to stdout. {crop} renders as "x0,y0,x1,y1" in normalized units, or empty.
class CommandFrameSource : public FrameSource {
 public:
  explicit CommandFrameSource(std::string command_template);
  Outcome<std::string> fetch(const VideoRecord& video, double timestamp,
                             int long_edge_px,
                             const std::optional<NormRect>& crop) override;

 private:
  std::string template_;
};

std::unique_ptr<FrameSource> make_frame_source(const RunConfig& cfg);

// Materializes the plan: one frame per timestamp, in order. A timestamp the
// source cannot serve reuses the nearest earlier frame under its own label;
// if even the first timestamp fails the whole extraction fails and the video
// id is carried in the error.
Outcome<FrameSet> extract_frames(const SamplingPlan& plan, const VideoRecord& video,
                                 FrameSource& source);

}  // namespace twopass
