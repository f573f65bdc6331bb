#include "twopass/gateway.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace twopass {

namespace {

const PromptTemplate kCoarseTemplate{PromptKind::Coarse,
R"(This is a traffic surveillance video sampled at
1 frame per second. Frame numbers correspond to
seconds in the video (frame 0 = 0s, frame 1 = 1s,
...). The video duration is {duration} seconds.

A traffic accident occurs in this video. Please
analyze carefully and answer:

1. Time: At what second does the collision or
   accident impact occur?
2. Location: Point to the exact location in the
   frame where the impact happens. Return
   coordinates as values between 0 and 1000,
   where (0,0) is top-left and (1000,1000) is
   bottom-right of the frame.
3. Type: head-on, rear-end, t-bone, sideswipe,
   or single.

Return ONLY a JSON object:
{"time": <seconds>, "x": <0-1000>,
 "y": <0-1000>, "type": "<type>"})"};

const PromptTemplate kFineTemplate{PromptKind::Fine,
R"(These frames are extracted at 5 frames per second
from a traffic surveillance video. Each frame is
labeled with its precise timestamp. The time
window shown is from {start}s to {end}s.

A traffic accident occurs somewhere in this video.
If the collision happens within this time window,
identify:
1. Exact time: The precise moment (to 0.1 second)
   of collision or impact.
2. Exact location: The impact point, as
   coordinates between 0 and 1000.

If you cannot see a collision in these frames,
return time as -1.

Return ONLY a JSON object:
{"time": <seconds with 1 decimal or -1>,
 "x": <0-1000>, "y": <0-1000>})"};

const PromptTemplate kTypeTemplate{PromptKind::Type,
R"(A traffic collision HAS occurred in this
surveillance clip. You MUST classify its type.
This clip shows ~6 seconds leading up to and
including the collision moment.

Collision types - pick exactly ONE:
- head_on: Two vehicles approach from OPPOSITE
  directions, collide front-to-front.
- rear_end: Two vehicles travel SAME direction;
  trailing one hits leading one from behind.
- t_bone: One vehicle strikes the SIDE of another
  at roughly 90 degrees.
- sideswipe: Two vehicles in parallel lanes make
  lateral/glancing contact.
- single: Only ONE vehicle involved.

Watch vehicle MOTION carefully across the clip.
You MUST pick the most likely type.)"};

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("endpoint must start with http:// or https://: " + endpoint);
  auto path_start = endpoint.find('/', scheme_end + 3);
  ParsedUrl url;
  if (path_start == std::string::npos) {
    url.base = endpoint;
    url.path = "/v1/chat/completions";
  } else {
    url.base = endpoint.substr(0, path_start);
    url.path = endpoint.substr(path_start);
  }
  return url;
}

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status <= 599);
}

thread_local DetRng jitter_rng{std::random_device{}()};

}  // namespace

std::string to_string(PromptKind k) {
  switch (k) {
    case PromptKind::Coarse: return "coarse";
    case PromptKind::Fine: return "fine";
    case PromptKind::Type: return "type";
  }
  return "coarse";
}

PromptKind prompt_kind_from_string(const std::string& s) {
  if (s == "coarse") return PromptKind::Coarse;
  if (s == "fine") return PromptKind::Fine;
  if (s == "type") return PromptKind::Type;
  throw InputError("unknown prompt kind: " + s);
}

const PromptTemplate& prompt_template(PromptKind kind) {
  switch (kind) {
    case PromptKind::Coarse: return kCoarseTemplate;
    case PromptKind::Fine: return kFineTemplate;
    case PromptKind::Type: return kTypeTemplate;
  }
  return kCoarseTemplate;
}

std::string render_prompt(const PromptTemplate& tmpl, const VideoRecord& video,
                          std::optional<std::pair<double, double>> window) {
  if (tmpl.kind == PromptKind::Fine && !window)
    throw InputError("fine prompt requires a refinement window");
  std::string body = tmpl.body;
  body = replace_all(body, "{duration}", format_fixed1(video.duration));
  if (window) {
    body = replace_all(body, "{start}", format_fixed1(window->first));
    body = replace_all(body, "{end}", format_fixed1(window->second));
  }
  for (const char* ph : {"{duration}", "{start}", "{end}"}) {
    if (body.find(ph) != std::string::npos)
      throw InputError(std::string("unresolved prompt placeholder: ") + ph);
  }
  return body;
}

void ProviderProfile::validate() const {
  if (endpoint.empty()) throw ConfigError("provider endpoint not configured");
  if (model.empty()) throw ConfigError("provider model not configured");
  if (temperature != 0.1) throw ConfigError("temperature is fixed at 0.1");
  const int expected = role == ProviderRole::Grounding ? 256 : 1024;
  if (max_tokens != expected)
    throw ConfigError("max_tokens must be " + std::to_string(expected) + " for this role");
  if (timeout_s <= 0) throw ConfigError("timeout must be > 0");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

ProviderProfile make_grounding_profile(const RunConfig& cfg) {
  ProviderProfile p;
  p.role = ProviderRole::Grounding;
  p.endpoint = cfg.grounding_endpoint;
  p.model = cfg.grounding_model;
  p.max_tokens = 256;
  p.timeout_s = cfg.request_timeout_s;
  p.max_retries = cfg.max_retries;
  p.backoff_base_s = cfg.backoff_base_s;
  p.api_key_env = cfg.grounding_api_key_env;
  return p;
}

ProviderProfile make_typing_profile(const RunConfig& cfg) {
  ProviderProfile p;
  p.role = ProviderRole::Typing;
  p.endpoint = cfg.typing_endpoint;
  p.model = cfg.typing_model;
  p.max_tokens = 1024;
  p.timeout_s = cfg.request_timeout_s;
  p.max_retries = cfg.max_retries;
  p.backoff_base_s = cfg.backoff_base_s;
  p.api_key_env = cfg.typing_api_key_env;
  return p;
}

MultimodalMessage build_message(const std::string& prompt, const FrameSet& frames,
                                PromptKind kind, const std::string& video_id) {
  if (frames.frames.empty()) throw InputError("cannot build a message from an empty frame set");
  MultimodalMessage msg;
  msg.prompt_kind = kind;
  msg.video_id = video_id;
  const bool decimal_tags = kind != PromptKind::Coarse;
  for (const Frame& f : frames.frames) {
    MultimodalMessage::Part tag;
    tag.kind = MultimodalMessage::Part::Kind::Text;
    tag.text = "[Frame at " + format_tag_seconds(f.timestamp, decimal_tags) + "s]";
    msg.parts.push_back(std::move(tag));

    MultimodalMessage::Part image;
    image.kind = MultimodalMessage::Part::Kind::Image;
    image.image_bytes = f.bytes;
    msg.parts.push_back(std::move(image));
  }
  MultimodalMessage::Part text;
  text.kind = MultimodalMessage::Part::Kind::Text;
  text.text = prompt;
  msg.parts.push_back(std::move(text));
  return msg;
}

nlohmann::json message_to_wire(const ProviderProfile& profile, const MultimodalMessage& message) {
  nlohmann::json content = nlohmann::json::array();
  for (const auto& part : message.parts) {
    if (part.kind == MultimodalMessage::Part::Kind::Text) {
      content.push_back({{"type", "text"}, {"text", part.text}});
    } else {
      content.push_back(
          {{"type", "image_url"},
           {"image_url",
            {{"url", "data:image/jpeg;base64," + base64_encode(part.image_bytes)}}}});
    }
  }
  return nlohmann::json{
      {"model", profile.model},
      {"temperature", profile.temperature},
      {"max_tokens", profile.max_tokens},
      {"user", message.video_id + "|" + to_string(message.prompt_kind)},
      {"messages", nlohmann::json::array({nlohmann::json{{"role", "user"}, {"content", content}}})},
  };
}

std::string request_fingerprint(const ProviderProfile& profile, const MultimodalMessage& message) {
  std::string blob = profile.model;
  blob += '\x1f';
  blob += to_string(message.prompt_kind);
  for (const auto& part : message.parts) {
    blob += '\x1f';
    blob += part.kind == MultimodalMessage::Part::Kind::Text ? part.text : part.image_bytes;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(blob)));
  return buf;
}

CallOutcome call_with_retry(const ProviderProfile& profile, const MultimodalMessage& message,
                            const Sleeper& sleep_fn) {
  profile.validate();
  std::string api_key;
  if (!profile.api_key_env.empty()) {
    const char* key = std::getenv(profile.api_key_env.c_str());
    if (!key || !*key)
      throw ConfigError("credential environment variable not set: " + profile.api_key_env);
    api_key = key;
  }

  const ParsedUrl url = parse_endpoint(profile.endpoint);
  const std::string body = message_to_wire(profile, message).dump();

  auto sleep_for = sleep_fn ? sleep_fn : [](double s) {
    std::this_thread::sleep_for(std::chrono::duration<double>(s));
  };

  CallOutcome outcome;
  const auto t0 = std::chrono::steady_clock::now();
  const int max_attempts = profile.max_retries + 1;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    outcome.attempts = attempt + 1;

    httplib::Client client(url.base);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::duration<double>(profile.timeout_s)));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::duration<double>(profile.timeout_s)));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::duration<double>(profile.timeout_s)));
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

    auto res = client.Post(url.path, headers, body, "application/json");

    bool retryable = false;
    if (!res) {
      outcome.error = "transport error: " + httplib::to_string(res.error());
      retryable = true;
    } else if (res->status == 200) {
      std::string text;
      std::string parse_error;
      try {
        auto parsed = nlohmann::json::parse(res->body);
        if (parsed.contains("choices") && parsed["choices"].is_array() &&
            !parsed["choices"].empty()) {
          const auto& msg = parsed["choices"][0];
          if (msg.contains("message") && msg["message"].contains("content") &&
              msg["message"]["content"].is_string()) {
            text = msg["message"]["content"].get<std::string>();
          }
        }
      } catch (const nlohmann::json::exception& e) {
        parse_error = e.what();
      }
      if (!text.empty()) {
        outcome.status = CallOutcome::Status::Ok;
        outcome.raw_text = std::move(text);
        outcome.error.clear();
      } else {
        outcome.error = parse_error.empty() ? "malformed provider response"
                                            : "malformed provider response: " + parse_error;
      }
      break;  // a 200 is terminal either way
    } else if (retryable_status(res->status)) {
      outcome.error = "HTTP " + std::to_string(res->status);
      retryable = true;
    } else {
      outcome.error = "HTTP " + std::to_string(res->status);
      break;
    }

    if (!retryable || attempt + 1 >= max_attempts) break;
    // Full jitter: uniform in [0, base * 2^attempt).
    const double ceiling = profile.backoff_base_s * std::pow(2.0, attempt);
    sleep_for(jitter_rng.next_unit() * ceiling);
  }

  outcome.latency_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return outcome;
}

}  // namespace twopass
