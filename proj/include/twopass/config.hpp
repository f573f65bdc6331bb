#pragma once

#include <string>

#include <json.hpp>

namespace twopass {

enum class FallbackMode { NaiveFill, PhysicsPlugin };

struct WorkerCounts {
  int pass1 = 5;
  int pass2 = 5;
  int typing = 10;
};

// Every knob of the grounding run and the metric, resolvable from
// defaults < JSON config file < CLI flags (< environment for secrets).
struct RunConfig {
  // refinement window and gates
  double window_delta = 3.0;  // seconds around the coarse time
  double tau = 0.3;           // temporal boundary tolerance, seconds
  double margin = 10.0;       // spatial margin on the [0,1000] grid; 0 disables the gate

  // type clip
  double crop_factor = 2.5;   // crop square side = shorter frame dim / crop_factor
  double type_clip_fps = 5.0;
  int type_clip_long_edge_px = 720;

  // metric
  double sigma_t = 1.0;
  double sigma_x = 0.127;
  double sigma_y = 0.119;

  // execution
  WorkerCounts workers;
  int max_retries = 3;
  double backoff_base_s = 1.0;
  double request_timeout_s = 120.0;

  // ablation switches
  bool use_pass2_time = true;
  bool use_pass2_space = true;
  bool use_specialist_type = true;

  // fallback
  FallbackMode fallback_mode = FallbackMode::NaiveFill;
  std::string fallback_cmd;  // external predictor command template (PhysicsPlugin mode)

  // frame extraction; empty -> directory-of-images backend
  std::string extractor_cmd;

  // providers; empty *_api_key_env means the endpoint needs no credential
  std::string grounding_endpoint;
  std::string grounding_model = "qwen3-vl-plus";
  std::string grounding_api_key_env = "GROUNDING_API_KEY";
  std::string typing_endpoint;
  std::string typing_model = "gemini-3.1-flash-lite";
  std::string typing_api_key_env = "TYPING_API_KEY";

  void validate() const;  // throws ConfigError

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  // Applies recognized keys from `j` on top of *this; unknown keys throw.
  void merge_json(const nlohmann::json& j);
};

std::string to_string(FallbackMode m);
FallbackMode fallback_mode_from_string(const std::string& s);

}  // namespace twopass
