#include "twopass/mock_vlm.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace twopass {

namespace {

using nlohmann::json;

std::string make_key(const std::string& video_id, PromptKind kind) {
  return video_id + "|" + to_string(kind);
}

// Requests without usable "user" metadata fall back to recognizing the prompt.
PromptKind guess_kind(const std::string& prompt_text) {
  if (prompt_text.find("5 frames per second") != std::string::npos) return PromptKind::Fine;
  if (prompt_text.find("classify its type") != std::string::npos) return PromptKind::Type;
  return PromptKind::Coarse;
}

json ok_envelope(const std::string& content) {
  return json{
      {"model", "mock-vlm"},
      {"choices", json::array({json{{"message", json{{"role", "assistant"}, {"content", content}}}}})},
  };
}

struct ParsedRequest {
  std::string video_id;
  PromptKind kind = PromptKind::Coarse;
};

ParsedRequest parse_request(const std::string& body) {
  ParsedRequest out;
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) return out;
  if (j.contains("user") && j["user"].is_string()) {
    std::string user = j["user"].get<std::string>();
    auto sep = user.rfind('|');
    if (sep != std::string::npos) {
      out.video_id = user.substr(0, sep);
      try {
        out.kind = prompt_kind_from_string(user.substr(sep + 1));
        return out;
      } catch (const InputError&) {
        // fall through to prompt sniffing
      }
    } else {
      out.video_id = user;
    }
  }
  std::string prompt;
  if (j.contains("messages") && j["messages"].is_array() && !j["messages"].empty()) {
    const auto& content = j["messages"][0]["content"];
    if (content.is_array()) {
      for (auto it = content.rbegin(); it != content.rend(); ++it) {
        if ((*it).contains("type") && (*it)["type"] == "text") {
          prompt = (*it)["text"].get<std::string>();
          break;
        }
      }
    } else if (content.is_string()) {
      prompt = content.get<std::string>();
    }
  }
  out.kind = guess_kind(prompt);
  return out;
}

}  // namespace

MockBehavior mock_behavior_from_string(const std::string& s) {
  std::string v = to_lower(trim(s));
  if (v == "ok") return MockBehavior::Ok;
  if (v == "http500") return MockBehavior::Http500;
  if (v == "http429") return MockBehavior::Http429;
  if (v == "timeout") return MockBehavior::Timeout;
  if (v == "garbage") return MockBehavior::Garbage;
  throw InputError("unknown mock behavior: " + s);
}

std::string to_string(MockBehavior b) {
  switch (b) {
    case MockBehavior::Ok: return "ok";
    case MockBehavior::Http500: return "http500";
    case MockBehavior::Http429: return "http429";
    case MockBehavior::Timeout: return "timeout";
    case MockBehavior::Garbage: return "garbage";
  }
  return "ok";
}

std::string mock_default_body(PromptKind kind) {
  switch (kind) {
    case PromptKind::Coarse:
      return R"({"time": 1, "x": 500, "y": 500, "type": "single"})";
    case PromptKind::Fine:
      return R"({"time": -1, "x": 0, "y": 0})";
    case PromptKind::Type:
      return "single";
  }
  return "single";
}

MockScript MockScript::load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mock script: " + path);
  MockScript script;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw InputError(path + ": line " + std::to_string(lineno) + ": invalid JSON");
    ScriptEntry entry;
    entry.video_id = j.at("video_id").get<std::string>();
    entry.kind = prompt_kind_from_string(j.at("kind").get<std::string>());
    entry.body = j.value("body", std::string{});
    entry.behaviors.clear();
    if (j.contains("behaviors")) {
      for (const auto& b : j["behaviors"])
        entry.behaviors.push_back(mock_behavior_from_string(b.get<std::string>()));
    } else {
      entry.behaviors.push_back(mock_behavior_from_string(j.value("behavior", "ok")));
    }
    if (entry.behaviors.empty())
      throw InputError(path + ": line " + std::to_string(lineno) + ": empty behavior sequence");
    script.add(std::move(entry));
  }
  return script;
}

void MockScript::save_jsonl(const std::string& path) const {
  std::ostringstream out;
  for (const auto& e : entries) {
    json j{{"video_id", e.video_id}, {"kind", to_string(e.kind)}, {"body", e.body}};
    if (e.behaviors.size() == 1) {
      j["behavior"] = to_string(e.behaviors[0]);
    } else {
      json arr = json::array();
      for (auto b : e.behaviors) arr.push_back(to_string(b));
      j["behaviors"] = arr;
    }
    out << j.dump() << '\n';
  }
  write_file(path, out.str());
}

void MockScript::add(ScriptEntry entry) {
  for (const auto& e : entries) {
    if (e.video_id == entry.video_id && e.kind == entry.kind)
      throw InputError("duplicate script key: " + make_key(entry.video_id, entry.kind));
  }
  if (entry.behaviors.empty()) throw InputError("script entry needs at least one behavior");
  entries.push_back(std::move(entry));
}

struct MockVlmServer::Impl {
  MockScript script;
  MockServerOptions opts;
  std::map<std::string, const ScriptEntry*> index;
  httplib::Server server;
  std::thread thread;
  std::mutex mu;
  std::map<std::string, std::uint64_t> attempts;
  std::map<std::string, std::uint64_t> hits;
  std::atomic<bool> stopping{false};

  std::uint64_t next_attempt(const std::string& key) {
    std::lock_guard<std::mutex> lock(mu);
    hits[key] += 1;
    return attempts[key]++;
  }

  void hold_connection() {
    const auto until = std::chrono::steady_clock::now() +
                       std::chrono::duration<double>(opts.timeout_hold_s);
    while (!stopping.load() && std::chrono::steady_clock::now() < until) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }

  void record_entry(const ScriptEntry& entry) {
    std::lock_guard<std::mutex> lock(mu);
    // replace any previous recording for the key
    for (auto& e : script.entries) {
      if (e.video_id == entry.video_id && e.kind == entry.kind) {
        e = entry;
        if (!opts.record_script_path.empty()) script.save_jsonl(opts.record_script_path);
        return;
      }
    }
    script.entries.push_back(entry);
    if (!opts.record_script_path.empty()) script.save_jsonl(opts.record_script_path);
  }

  void handle(const httplib::Request& req, httplib::Response& res) {
    ParsedRequest parsed = parse_request(req.body);
    const std::string key = make_key(parsed.video_id, parsed.kind);
    const std::uint64_t attempt = next_attempt(key);

    if (!opts.record_upstream.empty()) {
      handle_record(req, res, parsed);
      return;
    }

    // Seeded failure injection: the whole coarse pass for a chosen video id
    // fails on every attempt, so fallback routing is replayable.
    if (parsed.kind == PromptKind::Coarse &&
        forced_failure(opts.seed, parsed.video_id, opts.failure_rate)) {
      res.status = 500;
      res.set_content(R"({"error":"injected failure"})", "application/json");
      return;
    }

    MockBehavior behavior = MockBehavior::Ok;
    std::string body = mock_default_body(parsed.kind);
    auto it = index.find(key);
    if (it != index.end()) {
      const auto& seq = it->second->behaviors;
      behavior = seq[std::min<std::size_t>(attempt, seq.size() - 1)];
      if (!it->second->body.empty()) body = it->second->body;
    }

    switch (behavior) {
      case MockBehavior::Ok:
        res.status = 200;
        res.set_content(ok_envelope(body).dump(), "application/json");
        break;
      case MockBehavior::Http500:
        res.status = 500;
        res.set_content(R"({"error":"scripted 500"})", "application/json");
        break;
      case MockBehavior::Http429:
        res.status = 429;
        res.set_content(R"({"error":"scripted 429"})", "application/json");
        break;
      case MockBehavior::Timeout:
        hold_connection();
        res.status = 200;
        res.set_content(ok_envelope(body).dump(), "application/json");
        break;
      case MockBehavior::Garbage:
        res.status = 200;
        res.set_content(ok_envelope("mock garbage response with no usable answer").dump(),
                        "application/json");
        break;
    }
  }

  void handle_record(const httplib::Request& req, httplib::Response& res,
                     const ParsedRequest& parsed) {
    auto scheme_end = opts.record_upstream.find("://");
    if (scheme_end == std::string::npos) {
      res.status = 500;
      res.set_content(R"({"error":"bad upstream url"})", "application/json");
      return;
    }
    auto path_start = opts.record_upstream.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? opts.record_upstream
                                                       : opts.record_upstream.substr(0, path_start);
    std::string path = path_start == std::string::npos ? req.path
                                                       : opts.record_upstream.substr(path_start);

    httplib::Client client(base);
    auto upstream = client.Post(path, req.body, "application/json");

    ScriptEntry entry;
    entry.video_id = parsed.video_id;
    entry.kind = parsed.kind;
    if (!upstream) {
      entry.behaviors = {MockBehavior::Http500};
      record_entry(entry);
      res.status = 502;
      res.set_content(R"({"error":"upstream unreachable"})", "application/json");
      return;
    }
    if (upstream->status == 200) {
      entry.behaviors = {MockBehavior::Ok};
      json j = json::parse(upstream->body, nullptr, false);
      if (!j.is_discarded() && j.contains("choices") && !j["choices"].empty() &&
          j["choices"][0].contains("message")) {
        entry.body = j["choices"][0]["message"].value("content", "");
      }
    } else if (upstream->status == 429) {
      entry.behaviors = {MockBehavior::Http429};
    } else {
      entry.behaviors = {MockBehavior::Http500};
    }
    record_entry(entry);
    res.status = upstream->status;
    const std::string content_type = upstream->has_header("Content-Type")
                                         ? upstream->get_header_value("Content-Type")
                                         : "application/json";
    res.set_content(upstream->body, content_type);
  }
};

MockVlmServer::MockVlmServer(MockScript script, MockServerOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->script = std::move(script);
  impl_->opts = std::move(options);
  for (const auto& e : impl_->script.entries) impl_->index[make_key(e.video_id, e.kind)] = &e;

  impl_->server.Post(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
    requests_.fetch_add(1);
    impl_->handle(req, res);
  });
  impl_->server.Get("/__stats", [this](const httplib::Request&, httplib::Response& res) {
    json per_key = json::object();
    {
      std::lock_guard<std::mutex> lock(impl_->mu);
      for (const auto& [k, v] : impl_->hits) per_key[k] = v;
    }
    json j{{"total", requests_.load()}, {"per_key", per_key}};
    res.set_content(j.dump(), "application/json");
  });
}

MockVlmServer::~MockVlmServer() { stop(); }

void MockVlmServer::start(int port) {
  if (!impl_->server.bind_to_port("127.0.0.1", port))
    throw ConfigError("cannot bind mock server to port " + std::to_string(port));
  port_ = port;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

int MockVlmServer::start_any_port() {
  int port = impl_->server.bind_to_any_port("127.0.0.1");
  if (port <= 0) throw ConfigError("cannot bind mock server to an ephemeral port");
  port_ = port;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void MockVlmServer::stop() {
  if (!impl_) return;
  impl_->stopping.store(true);
  if (impl_->server.is_running()) impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string MockVlmServer::endpoint() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
}

std::uint64_t MockVlmServer::request_count(const std::string& video_id, PromptKind kind) const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  auto it = impl_->hits.find(make_key(video_id, kind));
  return it == impl_->hits.end() ? 0 : it->second;
}

bool MockVlmServer::forced_failure(std::uint64_t seed, const std::string& video_id,
                                   double failure_rate) {
  if (failure_rate <= 0.0) return false;
  return hash_unit01(seed, video_id) < failure_rate;
}

}  // namespace twopass
