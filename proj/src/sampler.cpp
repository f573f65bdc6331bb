#include "twopass/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace fs = std::filesystem;

namespace twopass {

namespace {

constexpr std::size_t kMaxFrames = 30;
constexpr double kEps = 1e-9;

long long ceil_tenths(double seconds) {
  return static_cast<long long>(std::ceil(seconds * 10.0 - 1e-7));
}

// Frame dimensions after crop and long-edge resize. The resize only ever
// shrinks; sources smaller than the target keep their size.
std::pair<int, int> frame_dims(const VideoRecord& video, const SamplingPlan& plan) {
  if (video.width <= 0 || video.height <= 0) return {0, 0};
  double w = video.width;
  double h = video.height;
  if (plan.crop) {
    w *= plan.crop->width();
    h *= plan.crop->height();
  }
  double long_edge = std::max(w, h);
  if (long_edge > plan.long_edge_px) {
    double scale = plan.long_edge_px / long_edge;
    w *= scale;
    h *= scale;
  }
  return {std::max(1, static_cast<int>(std::llround(w))),
          std::max(1, static_cast<int>(std::llround(h)))};
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  out += "'";
  return out;
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

}  // namespace

std::string to_string(PassKind k) {
  switch (k) {
    case PassKind::Coarse: return "coarse";
    case PassKind::Fine: return "fine";
    case PassKind::TypeClip: return "type";
  }
  return "coarse";
}

void SamplingPlan::validate(double duration) const {
  if (long_edge_px <= 0) throw InputError("plan long_edge_px must be > 0");
  if (window_min < -kEps || window_max > duration + kEps || window_min > window_max + kEps)
    throw InputError("plan window outside [0, duration]");
  double prev = -1.0;
  for (double t : timestamps) {
    if (t < -kEps || t > duration + kEps) throw InputError("plan timestamp outside [0, duration]");
    if (t <= prev) throw InputError("plan timestamps must be strictly increasing");
    prev = t;
  }
  if ((pass_kind == PassKind::Coarse || pass_kind == PassKind::Fine) &&
      timestamps.size() > kMaxFrames)
    throw InputError("plan exceeds the 30-frame cap");
  if (crop) {
    if (crop->x0 < -kEps || crop->y0 < -kEps || crop->x1 > 1 + kEps || crop->y1 > 1 + kEps ||
        crop->width() <= 0 || crop->height() <= 0)
      throw InputError("crop rectangle must have positive area inside the unit square");
  }
}

SamplingPlan build_pass1_plan(const VideoRecord& video, const RunConfig& cfg) {
  (void)cfg;
  const double duration = video.duration;
  if (duration <= 0) throw InputError("video " + video.id + ": non-positive duration");

  SamplingPlan plan;
  plan.pass_kind = PassKind::Coarse;
  plan.long_edge_px = 720;
  plan.window_min = 0.0;
  plan.window_max = duration;

  const long long whole = static_cast<long long>(std::floor(duration + kEps));
  if (whole <= static_cast<long long>(kMaxFrames)) {
    // 1 fps on integer seconds, capped at 30 entries.
    const long long count = std::min<long long>(whole + 1, static_cast<long long>(kMaxFrames));
    for (long long s = 0; s < count; ++s) plan.timestamps.push_back(static_cast<double>(s));
  } else {
    // Longer clips keep full coverage: 30 samples, uniform stride over [0, D).
    const double stride = duration / static_cast<double>(kMaxFrames);
    for (std::size_t i = 0; i < kMaxFrames; ++i)
      plan.timestamps.push_back(stride * static_cast<double>(i));
  }
  plan.validate(duration);
  return plan;
}

SamplingPlan build_pass2_plan(const VideoRecord& video, double t1, const RunConfig& cfg) {
  const double duration = video.duration;
  if (duration <= 0) throw InputError("video " + video.id + ": non-positive duration");
  if (t1 < 0 || t1 > duration)
    throw InputError("video " + video.id + ": coarse time outside [0, duration]");

  SamplingPlan plan;
  plan.pass_kind = PassKind::Fine;
  plan.long_edge_px = 1024;
  plan.window_min = std::max(0.0, t1 - cfg.window_delta);
  plan.window_max = std::min(duration, t1 + cfg.window_delta);

  // 5 fps over [w_min, w_max), timestamps kept on the 0.1 s grid for tagging.
  long long tenths = ceil_tenths(plan.window_min);
  while (plan.timestamps.size() < kMaxFrames) {
    double t = static_cast<double>(tenths) / 10.0;
    if (t >= plan.window_max - kEps) break;
    plan.timestamps.push_back(t);
    tenths += 2;
  }
  plan.validate(duration);
  return plan;
}

SamplingPlan build_type_clip_plan(const VideoRecord& video, double t_star,
                                  NormPoint center, const RunConfig& cfg) {
  const double duration = video.duration;
  if (duration <= 0) throw InputError("video " + video.id + ": non-positive duration");
  if (t_star < 0 || t_star > duration)
    throw InputError("video " + video.id + ": t_star outside [0, duration]");
  if (center.x < 0 || center.x > 1 || center.y < 0 || center.y > 1)
    throw InputError("video " + video.id + ": crop center outside the unit square");
  if (video.width <= 0 || video.height <= 0)
    throw InputError("video " + video.id + ": frame dimensions required for the type clip");

  SamplingPlan plan;
  plan.pass_kind = PassKind::TypeClip;
  plan.long_edge_px = cfg.type_clip_long_edge_px;
  plan.window_min = std::max(0.0, t_star - 3.0);
  plan.window_max = std::min(duration, t_star + 2.0);

  const double stride = 1.0 / cfg.type_clip_fps;
  for (double t = plan.window_min; t < plan.window_max - kEps; t += stride) {
    plan.timestamps.push_back(t);
  }

  // Square crop with side = shorter frame dimension / crop_factor, centered on
  // the requested point and translated (never shrunk) to stay in frame.
  const double side_px = std::min(video.width, video.height) / cfg.crop_factor;
  const double sx = side_px / video.width;
  const double sy = side_px / video.height;
  NormRect crop;
  crop.x0 = center.x - sx / 2.0;
  crop.x1 = center.x + sx / 2.0;
  crop.y0 = center.y - sy / 2.0;
  crop.y1 = center.y + sy / 2.0;
  if (crop.x0 < 0) { crop.x1 -= crop.x0; crop.x0 = 0; }
  if (crop.x1 > 1) { crop.x0 -= crop.x1 - 1; crop.x1 = 1; }
  if (crop.y0 < 0) { crop.y1 -= crop.y0; crop.y0 = 0; }
  if (crop.y1 > 1) { crop.y0 -= crop.y1 - 1; crop.y1 = 1; }
  plan.crop = crop;

  plan.validate(duration);
  return plan;
}

Outcome<std::string> DirectoryFrameSource::fetch(const VideoRecord& video,
                                                 double timestamp, int long_edge_px,
                                                 const std::optional<NormRect>& crop) {
  (void)long_edge_px;
  (void)crop;
  std::error_code ec;
  if (!fs::is_directory(video.path, ec))
    return Outcome<std::string>::failure("frame directory not found: " + video.path);

  // Pick the file whose <seconds> stem is the largest value <= timestamp.
  double best = -1.0;
  fs::path best_path;
  for (const auto& entry : fs::directory_iterator(video.path, ec)) {
    if (!entry.is_regular_file()) continue;
    auto stem = entry.path().stem().string();
    auto secs = parse_strict_double(stem);
    if (!secs || *secs < 0) continue;
    if (*secs <= timestamp + 1e-6 && *secs > best) {
      best = *secs;
      best_path = entry.path();
    }
  }
  if (best < 0)
    return Outcome<std::string>::failure("no frame at or before " + format_double(timestamp) +
                                         "s in " + video.path);
  try {
    return Outcome<std::string>::success(read_file(best_path.string()));
  } catch (const IoError& e) {
    return Outcome<std::string>::failure(e.what());
  }
}

CommandFrameSource::CommandFrameSource(std::string command_template)
    : template_(std::move(command_template)) {
  if (template_.empty()) throw ConfigError("extractor_cmd is empty");
}

Outcome<std::string> CommandFrameSource::fetch(const VideoRecord& video,
                                               double timestamp, int long_edge_px,
                                               const std::optional<NormRect>& crop) {
  std::string crop_arg;
  if (crop) {
    crop_arg = format_double(crop->x0) + "," + format_double(crop->y0) + "," +
               format_double(crop->x1) + "," + format_double(crop->y1);
  }
  std::string cmd = template_;
  cmd = replace_all(cmd, "{input}", shell_quote(video.path));
  cmd = replace_all(cmd, "{timestamp}", format_double(timestamp));
  cmd = replace_all(cmd, "{long_edge}", std::to_string(long_edge_px));
  cmd = replace_all(cmd, "{crop}", crop_arg);

  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return Outcome<std::string>::failure("cannot launch extractor: " + cmd);
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, n);
  int rc = pclose(pipe);
  if (rc != 0)
    return Outcome<std::string>::failure("extractor exited with status " + std::to_string(rc));
  if (out.empty()) return Outcome<std::string>::failure("extractor produced no output");
  return Outcome<std::string>::success(std::move(out));
}

std::unique_ptr<FrameSource> make_frame_source(const RunConfig& cfg) {
  if (cfg.extractor_cmd.empty()) return std::make_unique<DirectoryFrameSource>();
  return std::make_unique<CommandFrameSource>(cfg.extractor_cmd);
}

Outcome<FrameSet> extract_frames(const SamplingPlan& plan, const VideoRecord& video,
                                 FrameSource& source) {
  FrameSet set;
  set.frames.reserve(plan.timestamps.size());
  auto [w, h] = frame_dims(video, plan);
  for (std::size_t i = 0; i < plan.timestamps.size(); ++i) {
    double t = plan.timestamps[i];
    auto bytes = source.fetch(video, t, plan.long_edge_px, plan.crop);
    if (bytes.ok()) {
      set.frames.push_back(Frame{t, std::move(*bytes), w, h});
    } else if (i > 0) {
      // Container metadata drift: reuse the nearest earlier frame, keep the label.
      set.frames.push_back(Frame{t, set.frames.back().bytes, w, h});
    } else {
      return Outcome<FrameSet>::failure("video " + video.id + ": " + bytes.error);
    }
  }
  return Outcome<FrameSet>::success(std::move(set));
}

}  // namespace twopass
