#pragma once

// Deterministic synthetic corpus for end-to-end tests: manifest, ground
// truth, per-video frame stubs (served by the directory backend) and a mock
// script whose fine-pass times are either exact window endpoints or at least
// 0.5 s away from them. One video in six answers the fine pass with (-1,-1)
// coordinates so the margin gate has something to reject.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "twopass/config.hpp"
#include "twopass/evaluator.hpp"
#include "twopass/mock_vlm.hpp"
#include "twopass/types.hpp"

namespace twopass::testing {

struct E2EFixture {
  std::string root;
  std::string manifest_path;
  std::string gt_path;
  std::string script_path;
  std::vector<VideoRecord> videos;
  std::vector<GroundTruth> gts;
  MockScript script;
};

inline double round1(double v) { return std::round(v * 10.0) / 10.0; }

inline std::string type_variant(CollisionType t, int salt) {
  const std::string canonical(to_string(t));
  switch (salt % 5) {
    case 0: return canonical;
    case 1: {
      std::string upper = canonical;
      for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      return upper;
    }
    case 2: {
      std::string underscored = canonical;
      for (auto& c : underscored) {
        if (c == '-') c = '_';
      }
      return underscored;
    }
    case 3: return "The collision type is " + canonical + ".";
    default: return "  " + canonical + "\n";
  }
}

inline E2EFixture make_e2e_fixture(const std::string& root, int n_videos) {
  namespace fs = std::filesystem;
  E2EFixture fx;
  fx.root = root;
  fs::create_directories(root);
  const std::string frames_root = (fs::path(root) / "frames").string();
  fs::create_directories(frames_root);

  std::string manifest = "video_id,path,duration,width,height\n";
  std::string gt_csv = "video_id,time,x,y,type\n";

  for (int i = 0; i < n_videos; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "v%03d", i);

    const double duration =
        i % 17 == 0 ? 36.0 + 2.0 * (i % 7) : 12.0 + (i % 19) + 0.5 * (i % 2);
    const int width = 1280, height = 720;

    const std::string video_dir = (fs::path(frames_root) / id).string();
    fs::create_directories(video_dir);
    {
      std::ofstream frame(fs::path(video_dir) / "0.jpg", std::ios::binary);
      frame << "stubframe:" << id;
    }

    VideoRecord video{id, video_dir, duration, width, height};
    fx.videos.push_back(video);

    const double gt_t = round1(0.45 * duration);
    const double gt_x = 0.20 + 0.09 * (i % 7);
    const double gt_y = 0.25 + 0.08 * (i % 5);
    const CollisionType gt_type = kCollisionTypes[static_cast<std::size_t>(i) % 5];
    fx.gts.push_back({id, gt_t, gt_x, gt_y, gt_type});

    manifest += std::string(id) + "," + video_dir + "," + format_double(duration) + ",1280,720\n";
    gt_csv += std::string(id) + "," + format_double(gt_t) + "," + format_double(gt_x) + "," +
              format_double(gt_y) + "," + std::string(to_string(gt_type)) + "\n";

    // coarse answer: near the truth, sometimes the wrong type
    const double biases[] = {0.0, 1.0, 2.0, -1.0, 3.0};
    const double t1 =
        round1(std::min(duration, std::max(0.0, gt_t + biases[i % 5])));
    const double x1 = gt_x * 1000.0 + 30.0;
    const double y1 = gt_y * 1000.0 + 25.0;
    const CollisionType c1 =
        kCollisionTypes[(static_cast<std::size_t>(i) + (i % 3 == 0 ? 1 : 0)) % 5];
    {
      ScriptEntry entry;
      entry.video_id = id;
      entry.kind = PromptKind::Coarse;
      char body[160];
      std::snprintf(body, sizeof(body), R"({"time": %s, "x": %s, "y": %s, "type": "%s"})",
                    format_double(t1).c_str(), format_double(x1).c_str(),
                    format_double(y1).c_str(), std::string(to_string(c1)).c_str());
      entry.body = body;
      if (i % 13 == 0)
        entry.behaviors = {MockBehavior::Http500, MockBehavior::Http500, MockBehavior::Ok};
      fx.script.add(std::move(entry));
    }

    // fine answer patterns
    const double w_min = std::max(0.0, t1 - 3.0);
    const double w_max = std::min(duration, t1 + 3.0);
    {
      ScriptEntry entry;
      entry.video_id = id;
      entry.kind = PromptKind::Fine;
      double t2;
      double x2 = gt_x * 1000.0;
      double y2 = gt_y * 1000.0;
      switch (i % 6) {
        case 0: t2 = round1(w_min + 1.7); break;
        case 1: t2 = -1.0; x2 = 0.0; y2 = 0.0; break;
        case 2: t2 = w_min; break;  // exact boundary hedge
        case 3: t2 = round1(w_min + 1.3); x2 = -1.0; y2 = -1.0; break;
        case 4: t2 = round1(w_min + 2.1); x2 = 60.0; y2 = 940.0; break;
        default: t2 = w_max; break;  // exact boundary hedge
      }
      char body[128];
      std::snprintf(body, sizeof(body), R"({"time": %s, "x": %s, "y": %s})",
                    format_double(t2).c_str(), format_double(x2).c_str(),
                    format_double(y2).c_str());
      entry.body = body;
      if (i % 23 == 0) entry.behaviors = {MockBehavior::Http500};  // exhausts retries
      fx.script.add(std::move(entry));
    }

    // typing answer: the truth in assorted spellings; some garbage, some retries
    {
      ScriptEntry entry;
      entry.video_id = id;
      entry.kind = PromptKind::Type;
      entry.body = type_variant(gt_type, i);
      if (i % 11 == 0) entry.behaviors = {MockBehavior::Garbage};
      else if (i % 7 == 0)
        entry.behaviors = {MockBehavior::Http500, MockBehavior::Ok};
      fx.script.add(std::move(entry));
    }
  }

  fx.manifest_path = (fs::path(root) / "manifest.csv").string();
  fx.gt_path = (fs::path(root) / "gt.csv").string();
  fx.script_path = (fs::path(root) / "script.jsonl").string();
  write_file(fx.manifest_path, manifest);
  write_file(fx.gt_path, gt_csv);
  fx.script.save_jsonl(fx.script_path);
  return fx;
}

// Config pointed at a mock endpoint: no credentials, fast backoff.
inline RunConfig fixture_config(const std::string& endpoint) {
  RunConfig cfg;
  cfg.grounding_endpoint = endpoint;
  cfg.typing_endpoint = endpoint;
  cfg.grounding_api_key_env.clear();
  cfg.typing_api_key_env.clear();
  cfg.backoff_base_s = 0.002;
  cfg.request_timeout_s = 10.0;
  return cfg;
}

}  // namespace twopass::testing
