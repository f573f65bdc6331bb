#include "twopass/config.hpp"

#include "twopass/util.hpp"

namespace twopass {

void RunConfig::validate() const {
  if (window_delta <= 0) throw ConfigError("window_delta must be > 0");
  if (tau <= 0) throw ConfigError("tau must be > 0");
  if (margin < 0) throw ConfigError("margin must be >= 0");
  if (crop_factor <= 1) throw ConfigError("crop_factor must be > 1");
  if (type_clip_fps <= 0) throw ConfigError("type_clip_fps must be > 0");
  if (type_clip_long_edge_px <= 0) throw ConfigError("type_clip_long_edge_px must be > 0");
  if (sigma_t <= 0 || sigma_x <= 0 || sigma_y <= 0) throw ConfigError("sigmas must be > 0");
  if (workers.pass1 < 1 || workers.pass2 < 1 || workers.typing < 1)
    throw ConfigError("worker counts must be >= 1");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (backoff_base_s < 0) throw ConfigError("backoff_base_s must be >= 0");
  if (request_timeout_s <= 0) throw ConfigError("request_timeout_s must be > 0");
  if (fallback_mode == FallbackMode::PhysicsPlugin && fallback_cmd.empty())
    throw ConfigError("fallback_mode=plugin requires fallback_cmd");
}

std::string to_string(FallbackMode m) {
  return m == FallbackMode::NaiveFill ? "naive" : "plugin";
}

FallbackMode fallback_mode_from_string(const std::string& s) {
  std::string v = to_lower(trim(s));
  if (v == "naive") return FallbackMode::NaiveFill;
  if (v == "plugin") return FallbackMode::PhysicsPlugin;
  throw ConfigError("unknown fallback mode: " + s + " (expected naive|plugin)");
}

nlohmann::json RunConfig::to_json() const {
  return nlohmann::json{
      {"window_delta", window_delta},
      {"tau", tau},
      {"margin", margin},
      {"crop_factor", crop_factor},
      {"type_clip_fps", type_clip_fps},
      {"type_clip_long_edge_px", type_clip_long_edge_px},
      {"sigma_t", sigma_t},
      {"sigma_x", sigma_x},
      {"sigma_y", sigma_y},
      {"workers", {{"pass1", workers.pass1}, {"pass2", workers.pass2}, {"typing", workers.typing}}},
      {"max_retries", max_retries},
      {"backoff_base_s", backoff_base_s},
      {"request_timeout_s", request_timeout_s},
      {"use_pass2_time", use_pass2_time},
      {"use_pass2_space", use_pass2_space},
      {"use_specialist_type", use_specialist_type},
      {"fallback_mode", to_string(fallback_mode)},
      {"fallback_cmd", fallback_cmd},
      {"extractor_cmd", extractor_cmd},
      {"grounding_endpoint", grounding_endpoint},
      {"grounding_model", grounding_model},
      {"grounding_api_key_env", grounding_api_key_env},
      {"typing_endpoint", typing_endpoint},
      {"typing_model", typing_model},
      {"typing_api_key_env", typing_api_key_env},
  };
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.merge_json(j);
  return cfg;
}

void RunConfig::merge_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "window_delta") window_delta = val.get<double>();
      else if (key == "tau") tau = val.get<double>();
      else if (key == "margin") margin = val.get<double>();
      else if (key == "crop_factor") crop_factor = val.get<double>();
      else if (key == "type_clip_fps") type_clip_fps = val.get<double>();
      else if (key == "type_clip_long_edge_px") type_clip_long_edge_px = val.get<int>();
      else if (key == "sigma_t") sigma_t = val.get<double>();
      else if (key == "sigma_x") sigma_x = val.get<double>();
      else if (key == "sigma_y") sigma_y = val.get<double>();
      else if (key == "workers") {
        if (val.contains("pass1")) workers.pass1 = val["pass1"].get<int>();
        if (val.contains("pass2")) workers.pass2 = val["pass2"].get<int>();
        if (val.contains("typing")) workers.typing = val["typing"].get<int>();
      } else if (key == "max_retries") max_retries = val.get<int>();
      else if (key == "backoff_base_s") backoff_base_s = val.get<double>();
      else if (key == "request_timeout_s") request_timeout_s = val.get<double>();
      else if (key == "use_pass2_time") use_pass2_time = val.get<bool>();
      else if (key == "use_pass2_space") use_pass2_space = val.get<bool>();
      else if (key == "use_specialist_type") use_specialist_type = val.get<bool>();
      else if (key == "fallback_mode") fallback_mode = fallback_mode_from_string(val.get<std::string>());
      else if (key == "fallback_cmd") fallback_cmd = val.get<std::string>();
      else if (key == "extractor_cmd") extractor_cmd = val.get<std::string>();
      else if (key == "grounding_endpoint") grounding_endpoint = val.get<std::string>();
      else if (key == "grounding_model") grounding_model = val.get<std::string>();
      else if (key == "grounding_api_key_env") grounding_api_key_env = val.get<std::string>();
      else if (key == "typing_endpoint") typing_endpoint = val.get<std::string>();
      else if (key == "typing_model") typing_model = val.get<std::string>();
      else if (key == "typing_api_key_env") typing_api_key_env = val.get<std::string>();
      else throw ConfigError("unknown config key: " + key);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad value for config key '" + key + "': " + e.what());
    }
  }
}

}  // namespace twopass
