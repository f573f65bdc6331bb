#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "twopass/sampler.hpp"
#include "twopass/types.hpp"
#include "twopass/util.hpp"

namespace twopass {

enum class PromptKind { Coarse, Fine, Type };

std::string to_string(PromptKind k);
PromptKind prompt_kind_from_string(const std::string& s);

struct PromptTemplate {
  PromptKind kind;
  std::string body;  // may contain {duration}, {start}, {end}
};

// The three fixed prompt templates. Their text is part of the wire contract;
// rendered output is covered by golden-file tests.
const PromptTemplate& prompt_template(PromptKind kind);

// Substitutes {duration} (coarse) or {start}/{end} (fine) at one-decimal
// precision. The fine prompt requires a window; the type prompt has no
// placeholders.
std::string render_prompt(const PromptTemplate& tmpl, const VideoRecord& video,
                          std::optional<std::pair<double, double>> window);

enum class ProviderRole { Grounding, Typing };

struct ProviderProfile {
  ProviderRole role = ProviderRole::Grounding;
  std::string endpoint;  // http(s)://host[:port][/path]
  std::string model;
  double temperature = 0.1;
  int max_tokens = 256;  // 256 for grounding, 1024 for typing
  double timeout_s = 120.0;
  int max_retries = 3;
  double backoff_base_s = 1.0;
  std::string api_key_env;  // name of the env var holding the bearer token; empty -> no auth

  void validate() const;  // throws ConfigError
};

ProviderProfile make_grounding_profile(const RunConfig& cfg);
ProviderProfile make_typing_profile(const RunConfig& cfg);

// One interleaved user message: a "[Frame at <t>s]" tag then the image, per
// frame, followed by the prompt text.
struct MultimodalMessage {
  struct Part {
    enum class Kind { Text, Image };
    Kind kind = Kind::Text;
    std::string text;         // tag or prompt text
    std::string image_bytes;  // encoded image when kind == Image
  };

  PromptKind prompt_kind = PromptKind::Coarse;
  std::string video_id;
  std::vector<Part> parts;
};

MultimodalMessage build_message(const std::string& prompt, const FrameSet& frames,
                                PromptKind kind, const std::string& video_id);

// Chat-completions style request body; images travel base64-encoded as data
// URLs. The "user" field carries "<video_id>|<kind>" so replay servers can
// key on it; real providers ignore it.
nlohmann::json message_to_wire(const ProviderProfile& profile, const MultimodalMessage& message);

// Stable hash of everything that determines the request.
std::string request_fingerprint(const ProviderProfile& profile, const MultimodalMessage& message);

struct CallOutcome {
  enum class Status { Ok, Failed };
  Status status = Status::Failed;
  std::string raw_text;  // non-empty iff Ok
  int attempts = 0;
  double latency_s = 0.0;
  std::string error;  // last failure reason when Failed
};

// Abstracts the transport so orchestration tests can stub it.
class VlmClient {
 public:
  virtual ~VlmClient() = default;
  virtual CallOutcome call(const ProviderProfile& profile, const MultimodalMessage& message) = 0;
};

using Sleeper = std::function<void(double /*seconds*/)>;

// POSTs the message, retrying transport errors, HTTP 5xx and 429 with
// exponential backoff (base 1 s, factor 2, full jitter). Other 4xx are
// terminal. Exhaustion yields Failed as a value, never an exception; a
// missing credential throws ConfigError before the first attempt.
CallOutcome call_with_retry(const ProviderProfile& profile, const MultimodalMessage& message,
                            const Sleeper& sleep_fn = {});

class HttpVlmClient : public VlmClient {
 public:
  CallOutcome call(const ProviderProfile& profile, const MultimodalMessage& message) override {
    return call_with_retry(profile, message);
  }
};

}  // namespace twopass
