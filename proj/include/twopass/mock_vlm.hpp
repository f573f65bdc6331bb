#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "twopass/gateway.hpp"
#include "twopass/util.hpp"

namespace twopass {

enum class MockBehavior { Ok, Http500, Http429, Timeout, Garbage };

MockBehavior mock_behavior_from_string(const std::string& s);
std::string to_string(MockBehavior b);

// One scripted response keyed by (video_id, prompt kind). `behaviors` is
// indexed by the attempt counter for that key; the last entry repeats.
struct ScriptEntry {
  std::string video_id;
  PromptKind kind = PromptKind::Coarse;
  std::string body;  // response text for Ok attempts
  std::vector<MockBehavior> behaviors{MockBehavior::Ok};
};

struct MockScript {
  std::vector<ScriptEntry> entries;

  static MockScript load_jsonl(const std::string& path);
  void save_jsonl(const std::string& path) const;
  void add(ScriptEntry entry);  // throws InputError on duplicate keys
};

struct MockServerOptions {
  double failure_rate = 0.0;  // forced Http500 probability per coarse video id
  std::uint64_t seed = 0;
  double timeout_hold_s = 6.0;     // how long Timeout behavior stalls
  std::string record_upstream;     // proxy-and-record when non-empty
  std::string record_script_path;  // where recorded entries are appended
};

// Deterministic chat-completions endpoint. Responses are keyed on the
// request's "user" metadata ("<video_id>|<kind>"), never on arrival order, so
// any number of concurrent workers sees the same behavior.
class MockVlmServer {
 public:
  explicit MockVlmServer(MockScript script, MockServerOptions options = {});
  ~MockVlmServer();

  void start(int port);   // throws ConfigError when the port cannot be bound
  int start_any_port();   // returns the bound port
  void stop();

  int port() const { return port_; }
  std::string endpoint() const;

  std::uint64_t request_count() const { return requests_.load(); }
  std::uint64_t request_count(const std::string& video_id, PromptKind kind) const;

  // The seeded per-video failure decision, exposed so runs can be checked
  // against the exact forced set.
  static bool forced_failure(std::uint64_t seed, const std::string& video_id, double failure_rate);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
  std::atomic<std::uint64_t> requests_{0};
};

// Default bodies served for unscripted keys; exported for tests.
std::string mock_default_body(PromptKind kind);

}  // namespace twopass
