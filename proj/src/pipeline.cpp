#include "twopass/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

namespace fs = std::filesystem;

namespace twopass {

namespace {

using nlohmann::json;

double clamp(double v, double lo, double hi) { return std::max(lo, std::min(hi, v)); }

Source source_from_string(const std::string& s) {
  if (s == "pass1") return Source::Pass1;
  if (s == "pass2") return Source::Pass2;
  throw InputError("unknown source tag: " + s);
}

TypeSource type_source_from_string(const std::string& s) {
  if (s == "specialist") return TypeSource::Specialist;
  if (s == "pass1_backup") return TypeSource::Pass1Backup;
  if (s == "fallback") return TypeSource::Fallback;
  throw InputError("unknown type source tag: " + s);
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

Pass1Result pass1_from_parsed(const json& parsed) {
  Pass1Result r;
  r.t1 = parsed.at("time").get<double>();
  r.raw_x1 = parsed.at("x").get<double>();
  r.raw_y1 = parsed.at("y").get<double>();
  r.c1 = *normalize_type(parsed.at("type").get<std::string>());
  return r;
}

Pass2Result pass2_from_parsed(const json& parsed) {
  return {parsed.at("time").get<double>(), parsed.at("x").get<double>(),
          parsed.at("y").get<double>()};
}

}  // namespace

std::string to_string(Source s) { return s == Source::Pass1 ? "pass1" : "pass2"; }

std::string to_string(TypeSource s) {
  switch (s) {
    case TypeSource::Specialist: return "specialist";
    case TypeSource::Pass1Backup: return "pass1_backup";
    case TypeSource::Fallback: return "fallback";
  }
  return "fallback";
}

json Prediction::to_json() const {
  return json{
      {"video_id", video_id},
      {"time", t_star},
      {"x", x_star},
      {"y", y_star},
      {"type", std::string(twopass::to_string(c_star))},
      {"provenance",
       json{{"pass1_ok", provenance.pass1_ok},
            {"pass2_ok", provenance.pass2_ok},
            {"typing_ok", provenance.typing_ok},
            {"time_source", twopass::to_string(provenance.time_source)},
            {"space_source", twopass::to_string(provenance.space_source)},
            {"type_source", twopass::to_string(provenance.type_source)}}},
  };
}

Prediction Prediction::from_json(const json& j) {
  Prediction p;
  p.video_id = j.at("video_id").get<std::string>();
  p.t_star = j.at("time").get<double>();
  p.x_star = j.at("x").get<double>();
  p.y_star = j.at("y").get<double>();
  p.c_star = *normalize_type(j.at("type").get<std::string>());
  const auto& prov = j.at("provenance");
  p.provenance.pass1_ok = prov.at("pass1_ok").get<bool>();
  p.provenance.pass2_ok = prov.at("pass2_ok").get<bool>();
  p.provenance.typing_ok = prov.at("typing_ok").get<bool>();
  p.provenance.time_source = source_from_string(prov.at("time_source").get<std::string>());
  p.provenance.space_source = source_from_string(prov.at("space_source").get<std::string>());
  p.provenance.type_source = type_source_from_string(prov.at("type_source").get<std::string>());
  return p;
}

json CallTrace::to_json() const {
  json j{{"kind", twopass::to_string(kind)},
         {"fingerprint", fingerprint},
         {"ok", ok},
         {"attempts", attempts},
         {"parse_ok", parse_ok}};
  if (!raw_text.empty()) j["raw_text"] = raw_text;
  if (!error.empty()) j["error"] = error;
  if (!parse_error.empty()) j["parse_error"] = parse_error;
  if (parse_ok) j["parsed"] = parsed;
  if (window) j["window"] = json::array({window->first, window->second});
  return j;
}

CallTrace CallTrace::from_json(const json& j) {
  CallTrace c;
  c.kind = prompt_kind_from_string(j.at("kind").get<std::string>());
  c.fingerprint = j.value("fingerprint", "");
  c.ok = j.at("ok").get<bool>();
  c.attempts = j.value("attempts", 0);
  c.raw_text = j.value("raw_text", "");
  c.error = j.value("error", "");
  c.parse_ok = j.value("parse_ok", false);
  c.parse_error = j.value("parse_error", "");
  if (j.contains("parsed")) c.parsed = j["parsed"];
  if (j.contains("window")) {
    c.window = std::make_pair(j["window"][0].get<double>(), j["window"][1].get<double>());
  }
  return c;
}

const CallTrace* PassTrace::find(PromptKind kind) const {
  for (const auto& c : calls) {
    if (c.kind == kind) return &c;
  }
  return nullptr;
}

json PassTrace::to_json() const {
  json calls_json = json::array();
  for (const auto& c : calls) calls_json.push_back(c.to_json());
  json j{{"video_id", video_id}, {"duration", duration}, {"calls", calls_json}};
  if (prediction) j["prediction"] = prediction->to_json();
  return j;
}

PassTrace PassTrace::from_json(const json& j) {
  PassTrace t;
  t.video_id = j.at("video_id").get<std::string>();
  t.duration = j.at("duration").get<double>();
  for (const auto& c : j.at("calls")) t.calls.push_back(CallTrace::from_json(c));
  if (j.contains("prediction")) t.prediction = Prediction::from_json(j["prediction"]);
  return t;
}

Prediction naive_fill(const VideoRecord& video) {
  if (video.duration <= 0) throw InputError("video " + video.id + ": non-positive duration");
  Prediction p;
  p.video_id = video.id;
  p.t_star = video.duration / 2.0;
  p.x_star = 0.5;
  p.y_star = 0.5;
  p.c_star = CollisionType::Single;
  p.provenance.type_source = TypeSource::Fallback;
  return p;
}

FallbackRunner::FallbackRunner(const RunConfig& cfg)
    : mode_(cfg.fallback_mode), command_(cfg.fallback_cmd) {
  if (mode_ == FallbackMode::PhysicsPlugin && command_.empty())
    throw ConfigError("fallback_mode=plugin requires fallback_cmd");
}

Prediction FallbackRunner::run(const VideoRecord& video) const {
  if (mode_ == FallbackMode::NaiveFill) return naive_fill(video);

  std::string cmd = command_;
  cmd = replace_all(cmd, "{input}", shell_quote(video.path));
  cmd = replace_all(cmd, "{id}", shell_quote(video.id));
  cmd = replace_all(cmd, "{duration}", format_double(video.duration));
  cmd = replace_all(cmd, "{width}", std::to_string(video.width));
  cmd = replace_all(cmd, "{height}", std::to_string(video.height));

  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return naive_fill(video);
  std::string out;
  char buf[1024];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, n);
  int rc = pclose(pipe);
  if (rc != 0) return naive_fill(video);

  // Accept "time,x,y,type" or a full "video_id,time,x,y,type" row.
  auto line = trim(out);
  auto nl = line.find('\n');
  if (nl != std::string::npos) line = trim(line.substr(0, nl));
  auto fields = split_csv_line(line);
  std::size_t base = fields.size() == 5 ? 1 : 0;
  if (fields.size() != 4 && fields.size() != 5) return naive_fill(video);
  auto t = parse_strict_double(fields[base]);
  auto x = parse_strict_double(fields[base + 1]);
  auto y = parse_strict_double(fields[base + 2]);
  auto type = normalize_type(fields[base + 3]);
  if (!t || !x || !y || !type.ok()) return naive_fill(video);

  Prediction p;
  p.video_id = video.id;
  p.t_star = clamp(*t, 0.0, video.duration);
  p.x_star = *x;
  p.y_star = *y;
  p.c_star = *type;
  p.provenance.type_source = TypeSource::Fallback;
  return p;
}

Prediction derive_prediction(const PassTrace& trace, const RunConfig& cfg) {
  const CallTrace* coarse = trace.find(PromptKind::Coarse);
  const bool pass1_ok = coarse && coarse->ok && coarse->parse_ok;

  if (!pass1_ok) {
    if (!trace.prediction)
      throw TraceError("trace for video " + trace.video_id +
                       " has no usable coarse pass and no recorded fallback prediction");
    return *trace.prediction;  // fallback rows are not re-derivable
  }

  const Pass1Result p1 = pass1_from_parsed(coarse->parsed);

  const CallTrace* fine = trace.find(PromptKind::Fine);
  const bool pass2_ok = fine && fine->ok && fine->parse_ok;
  Pass2Result p2{-1.0, 0.0, 0.0};  // failure sentinel, absorbed by the gates
  if (pass2_ok) p2 = pass2_from_parsed(fine->parsed);

  double w_min, w_max;
  if (fine && fine->window) {
    w_min = fine->window->first;
    w_max = fine->window->second;
  } else {
    w_min = std::max(0.0, p1.t1 - cfg.window_delta);
    w_max = std::min(trace.duration, p1.t1 + cfg.window_delta);
  }

  TimeDecision time{p1.t1, Source::Pass1};
  if (cfg.use_pass2_time) time = gate1_temporal(p1.t1, p2, w_min, w_max, cfg.tau);

  SpaceDecision space{{p1.raw_x1 / 1000.0, p1.raw_y1 / 1000.0}, Source::Pass1};
  if (cfg.use_pass2_space)
    space = gate2_spatial(p1.raw_x1, p1.raw_y1, p2.raw_x2, p2.raw_y2, cfg.margin);

  const CallTrace* typing = trace.find(PromptKind::Type);
  const bool typing_ok = typing && typing->ok && typing->parse_ok;

  Prediction p;
  p.video_id = trace.video_id;
  p.t_star = clamp(time.t_star, 0.0, trace.duration);
  p.x_star = space.point.x;
  p.y_star = space.point.y;
  if (cfg.use_specialist_type && typing_ok) {
    p.c_star = *normalize_type(typing->parsed.at("type").get<std::string>());
    p.provenance.type_source = TypeSource::Specialist;
  } else {
    p.c_star = p1.c1;
    p.provenance.type_source = TypeSource::Pass1Backup;
  }
  p.provenance.pass1_ok = true;
  p.provenance.pass2_ok = pass2_ok;
  p.provenance.typing_ok = typing_ok;
  p.provenance.time_source = time.source;
  p.provenance.space_source = space.source;
  return p;
}

namespace {

CallTrace run_coarse_stage(const VideoRecord& video, const RunConfig& cfg, VlmClient& client,
                           FrameSource& frames, const PassTrace* prior) {
  if (prior) {
    if (const CallTrace* prev = prior->find(PromptKind::Coarse)) return *prev;
  }
  CallTrace coarse;
  coarse.kind = PromptKind::Coarse;
  const SamplingPlan plan = build_pass1_plan(video, cfg);
  auto frame_set = extract_frames(plan, video, frames);
  if (!frame_set.ok()) {
    coarse.error = frame_set.error;  // treated exactly like an API failure
    return coarse;
  }
  const std::string prompt =
      render_prompt(prompt_template(PromptKind::Coarse), video, std::nullopt);
  const MultimodalMessage msg = build_message(prompt, *frame_set, PromptKind::Coarse, video.id);
  const ProviderProfile grounding = make_grounding_profile(cfg);
  coarse.fingerprint = request_fingerprint(grounding, msg);
  CallOutcome outcome = client.call(grounding, msg);
  coarse.ok = outcome.status == CallOutcome::Status::Ok;
  coarse.attempts = outcome.attempts;
  coarse.raw_text = outcome.raw_text;
  coarse.error = outcome.error;
  coarse.latency_s = outcome.latency_s;
  if (coarse.ok) {
    auto parsed = parse_pass1(coarse.raw_text, video.duration);
    if (parsed.ok()) {
      coarse.parse_ok = true;
      coarse.parsed = json{{"time", parsed->t1},
                           {"x", parsed->raw_x1},
                           {"y", parsed->raw_y1},
                           {"type", std::string(twopass::to_string(parsed->c1))}};
    } else {
      coarse.parse_error = parsed.error;
    }
  }
  return coarse;
}

CallTrace run_fine_stage(const VideoRecord& video, const RunConfig& cfg, VlmClient& client,
                         FrameSource& frames, double t1, const PassTrace* prior) {
  if (prior) {
    if (const CallTrace* prev = prior->find(PromptKind::Fine)) return *prev;
  }
  CallTrace fine;
  fine.kind = PromptKind::Fine;
  const SamplingPlan plan = build_pass2_plan(video, t1, cfg);
  fine.window = std::make_pair(plan.window_min, plan.window_max);
  auto frame_set = extract_frames(plan, video, frames);
  if (!frame_set.ok()) {
    fine.error = frame_set.error;
    return fine;
  }
  const std::string prompt =
      render_prompt(prompt_template(PromptKind::Fine), video,
                    std::make_pair(plan.window_min, plan.window_max));
  const MultimodalMessage msg = build_message(prompt, *frame_set, PromptKind::Fine, video.id);
  const ProviderProfile grounding = make_grounding_profile(cfg);
  fine.fingerprint = request_fingerprint(grounding, msg);
  CallOutcome outcome = client.call(grounding, msg);
  fine.ok = outcome.status == CallOutcome::Status::Ok;
  fine.attempts = outcome.attempts;
  fine.raw_text = outcome.raw_text;
  fine.error = outcome.error;
  fine.latency_s = outcome.latency_s;
  if (fine.ok) {
    auto parsed = parse_pass2(fine.raw_text);
    if (parsed.ok()) {
      fine.parse_ok = true;
      fine.parsed = json{{"time", parsed->t2}, {"x", parsed->raw_x2}, {"y", parsed->raw_y2}};
    } else {
      fine.parse_error = parsed.error;
    }
  }
  return fine;
}

CallTrace run_typing_stage(const VideoRecord& video, const RunConfig& cfg, VlmClient& client,
                           FrameSource& frames, double t_star, NormPoint coarse_point,
                           const PassTrace* prior) {
  if (prior) {
    if (const CallTrace* prev = prior->find(PromptKind::Type)) return *prev;
  }
  CallTrace typing;
  typing.kind = PromptKind::Type;
  const SamplingPlan plan = build_type_clip_plan(video, t_star, coarse_point, cfg);
  auto frame_set = extract_frames(plan, video, frames);
  if (!frame_set.ok()) {
    typing.error = frame_set.error;
    return typing;
  }
  const std::string prompt =
      render_prompt(prompt_template(PromptKind::Type), video, std::nullopt);
  const MultimodalMessage msg = build_message(prompt, *frame_set, PromptKind::Type, video.id);
  const ProviderProfile profile = make_typing_profile(cfg);
  typing.fingerprint = request_fingerprint(profile, msg);
  CallOutcome outcome = client.call(profile, msg);
  typing.ok = outcome.status == CallOutcome::Status::Ok;
  typing.attempts = outcome.attempts;
  typing.raw_text = outcome.raw_text;
  typing.error = outcome.error;
  typing.latency_s = outcome.latency_s;
  if (typing.ok) {
    if (auto t = scan_type_response(typing.raw_text)) {
      typing.parse_ok = true;
      typing.parsed = json{{"type", std::string(twopass::to_string(*t))}};
    } else {
      typing.parse_error = "no collision type recognized in reply";
    }
  }
  return typing;
}

bool coarse_usable(const PassTrace& trace) {
  const CallTrace* coarse = trace.find(PromptKind::Coarse);
  return coarse && coarse->ok && coarse->parse_ok;
}

// The clip time span follows the gate outcome; the crop stays centered on the
// coarse point.
Prediction interim_prediction(const PassTrace& trace, const RunConfig& cfg) {
  RunConfig no_type_cfg = cfg;
  no_type_cfg.use_specialist_type = false;
  return derive_prediction(trace, no_type_cfg);
}

}  // namespace

PassTrace ground_video(const VideoRecord& video, const RunConfig& cfg, VlmClient& client,
                       FrameSource& frames, const FallbackRunner& fallback,
                       const PassTrace* prior) {
  PassTrace trace;
  trace.video_id = video.id;
  trace.duration = video.duration;

  trace.calls.push_back(run_coarse_stage(video, cfg, client, frames, prior));
  if (!coarse_usable(trace)) {
    // Whole video routes to the fallback predictor.
    if (prior && prior->prediction) trace.prediction = prior->prediction;
    else trace.prediction = fallback.run(video);
    return trace;
  }

  const Pass1Result p1 = pass1_from_parsed(trace.find(PromptKind::Coarse)->parsed);
  if (cfg.use_pass2_time || cfg.use_pass2_space) {
    trace.calls.push_back(run_fine_stage(video, cfg, client, frames, p1.t1, prior));
  }
  if (cfg.use_specialist_type) {
    const Prediction interim = interim_prediction(trace, cfg);
    trace.calls.push_back(run_typing_stage(video, cfg, client, frames, interim.t_star,
                                           {p1.raw_x1 / 1000.0, p1.raw_y1 / 1000.0}, prior));
  }
  trace.prediction = derive_prediction(trace, cfg);
  return trace;
}

json RunReport::to_json() const {
  auto stage = [](const StageStats& s) {
    json j{{"attempted", s.attempted}, {"failed", s.failed}};
    j["failure_rate"] =
        s.attempted == 0 ? 0.0 : static_cast<double>(s.failed) / static_cast<double>(s.attempted);
    j["mean_latency_s"] =
        s.attempted == 0 ? 0.0 : s.total_latency_s / static_cast<double>(s.attempted);
    j["mean_attempts"] =
        s.attempted == 0 ? 0.0 : s.total_attempts / static_cast<double>(s.attempted);
    return j;
  };
  return json{{"videos", videos},
              {"replayed", replayed},
              {"pass1", stage(pass1)},
              {"pass2", stage(pass2)},
              {"typing", stage(typing)},
              {"fallbacks", fallbacks},
              {"plugin_degradations", plugin_degradations},
              {"errors", errors},
              {"wall_time_s", wall_time_s}};
}

std::vector<VideoRecord> read_manifest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  std::vector<VideoRecord> videos;
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, bool> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (lineno == 1 && !fields.empty() && to_lower(fields[0]) == "video_id") continue;
    if (fields.size() != 5)
      throw InputError(path + ": line " + std::to_string(lineno) +
                       ": expected video_id,path,duration,width,height");
    VideoRecord v;
    v.id = trim(fields[0]);
    v.path = trim(fields[1]);
    auto dur = parse_strict_double(fields[2]);
    auto w = parse_strict_double(fields[3]);
    auto h = parse_strict_double(fields[4]);
    if (v.id.empty() || !dur || *dur <= 0 || !w || *w < 1 || !h || *h < 1)
      throw InputError(path + ": line " + std::to_string(lineno) + ": invalid manifest row");
    v.duration = *dur;
    v.width = static_cast<int>(*w);
    v.height = static_cast<int>(*h);
    if (seen.count(v.id))
      throw InputError(path + ": duplicate video_id: " + v.id);
    seen[v.id] = true;
    videos.push_back(std::move(v));
  }
  return videos;
}

std::vector<PassTrace> read_traces_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open traces: " + path);
  std::vector<PassTrace> traces;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw TraceError(path + ": line " + std::to_string(lineno) + ": invalid JSON");
    traces.push_back(PassTrace::from_json(j));
  }
  return traces;
}

void write_traces_jsonl(const std::string& path, const std::vector<PassTrace>& traces) {
  std::ostringstream out;
  for (const auto& t : traces) out << t.to_json().dump() << '\n';
  write_file(path, out.str());
}

namespace {

// Append-only journal used while a run is in flight; compacted into the
// canonical id-sorted trace file on clean completion.
class TraceJournal {
 public:
  explicit TraceJournal(const std::string& path) : path_(path) {}

  void append_call(const std::string& video_id, double duration, const CallTrace& call) {
    json j{{"type", "call"}, {"video_id", video_id}, {"duration", duration},
           {"call", call.to_json()}};
    append_line(j.dump());
  }

  void append_prediction(const std::string& video_id, double duration, const Prediction& pred) {
    json j{{"type", "prediction"}, {"video_id", video_id}, {"duration", duration},
           {"prediction", pred.to_json()}};
    append_line(j.dump());
  }

  static std::map<std::string, PassTrace> load(const std::string& path) {
    std::map<std::string, PassTrace> traces;
    std::ifstream in(path);
    if (!in) return traces;
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) continue;  // torn tail line after a crash
      const std::string id = j.value("video_id", "");
      if (id.empty()) continue;
      PassTrace& t = traces[id];
      t.video_id = id;
      t.duration = j.value("duration", t.duration);
      if (j["type"] == "call" && j.contains("call")) {
        CallTrace c = CallTrace::from_json(j["call"]);
        bool replaced = false;
        for (auto& existing : t.calls) {
          if (existing.kind == c.kind) {
            existing = c;
            replaced = true;
            break;
          }
        }
        if (!replaced) t.calls.push_back(std::move(c));
      } else if (j["type"] == "prediction" && j.contains("prediction")) {
        t.prediction = Prediction::from_json(j["prediction"]);
      }
    }
    return traces;
  }

 private:
  void append_line(const std::string& line) {
    std::lock_guard<std::mutex> lock(mu_);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to journal: " + path_);
    out << line << '\n';
  }

  std::string path_;
  std::mutex mu_;
};

}  // namespace

RunReport run_batch(const std::vector<VideoRecord>& manifest, const RunConfig& cfg,
                    VlmClient& client, const std::string& out_dir) {
  cfg.validate();
  // Fail on provider misconfiguration before any worker starts.
  for (const ProviderProfile& profile :
       {make_grounding_profile(cfg), make_typing_profile(cfg)}) {
    profile.validate();
    if (!profile.api_key_env.empty() && !std::getenv(profile.api_key_env.c_str()))
      throw ConfigError("credential environment variable not set: " + profile.api_key_env);
  }
  const auto t0 = std::chrono::steady_clock::now();

  fs::create_directories(out_dir);
  const std::string traces_path = (fs::path(out_dir) / "traces.jsonl").string();
  const std::string journal_path = (fs::path(out_dir) / "traces.partial.jsonl").string();
  const std::string predictions_path = (fs::path(out_dir) / "predictions.csv").string();
  const std::string report_path = (fs::path(out_dir) / "run_report.json").string();
  const std::string config_path = (fs::path(out_dir) / "config.json").string();

  // Prior state: canonical traces from an earlier completed run plus any
  // journal left by an interrupted one.
  std::map<std::string, PassTrace> prior;
  if (file_exists(traces_path)) {
    for (auto& t : read_traces_jsonl(traces_path)) prior[t.video_id] = std::move(t);
  }
  for (auto& [id, t] : TraceJournal::load(journal_path)) {
    PassTrace& dst = prior[id];
    dst.video_id = t.video_id;
    if (t.duration > 0) dst.duration = t.duration;
    for (auto& c : t.calls) {
      bool replaced = false;
      for (auto& existing : dst.calls) {
        if (existing.kind == c.kind) {
          existing = c;
          replaced = true;
          break;
        }
      }
      if (!replaced) dst.calls.push_back(std::move(c));
    }
    if (t.prediction) dst.prediction = t.prediction;
  }

  const FallbackRunner fallback(cfg);
  auto frame_source = make_frame_source(cfg);

  TraceJournal journal(journal_path);
  RunReport report;
  report.videos = manifest.size();

  std::mutex state_mu;
  std::map<std::string, PassTrace> done;

  auto account = [&](const PassTrace& trace, bool replayed) {
    // caller holds state_mu
    if (replayed) {
      report.replayed += 1;
    }
    for (const auto& c : trace.calls) {
      StageStats* stats = nullptr;
      switch (c.kind) {
        case PromptKind::Coarse: stats = &report.pass1; break;
        case PromptKind::Fine: stats = &report.pass2; break;
        case PromptKind::Type: stats = &report.typing; break;
      }
      stats->attempted += 1;
      if (!(c.ok && c.parse_ok)) stats->failed += 1;
      stats->total_attempts += c.attempts;
      stats->total_latency_s += c.latency_s;
    }
    if (trace.prediction &&
        trace.prediction->provenance.type_source == TypeSource::Fallback)
      report.fallbacks += 1;
  };

  CountdownLatch latch(manifest.size());

  ThreadPool pass1_pool(cfg.workers.pass1);
  ThreadPool pass2_pool(cfg.workers.pass2);
  ThreadPool typing_pool(cfg.workers.typing);

  auto finish = [&](PassTrace trace) {
    journal.append_prediction(trace.video_id, trace.duration, *trace.prediction);
    std::lock_guard<std::mutex> lock(state_mu);
    account(trace, false);
    done[trace.video_id] = std::move(trace);
    latch.count_down();
  };

  auto fail_video = [&](const VideoRecord& video, const std::string& what) {
    PassTrace trace;
    trace.video_id = video.id;
    trace.duration = video.duration;
    trace.prediction = naive_fill(video);
    std::lock_guard<std::mutex> lock(state_mu);
    report.errors.push_back("video " + video.id + ": " + what);
    report.fallbacks += 1;
    done[video.id] = std::move(trace);
    latch.count_down();
  };

  for (const VideoRecord& video : manifest) {
    auto it = prior.find(video.id);
    if (it != prior.end() && it->second.prediction) {
      // Complete trace: replay, no network.
      std::lock_guard<std::mutex> lock(state_mu);
      done[video.id] = it->second;
      account(it->second, true);
      latch.count_down();
      continue;
    }
    const PassTrace* prior_trace = it != prior.end() ? &it->second : nullptr;

    // Per-video chain coarse -> fine -> typing, hopping pools between stages
    // so pass 2 of one video overlaps pass 1 of the next.
    pass1_pool.submit([&, video, prior_trace] {
      try {
        PassTrace trace;
        trace.video_id = video.id;
        trace.duration = video.duration;
        trace.calls.push_back(
            run_coarse_stage(video, cfg, client, *frame_source, prior_trace));
        journal.append_call(video.id, video.duration, trace.calls.back());

        if (!coarse_usable(trace)) {
          trace.prediction = (prior_trace && prior_trace->prediction)
                                 ? prior_trace->prediction
                                 : std::optional<Prediction>(fallback.run(video));
          finish(std::move(trace));
          return;
        }

        pass2_pool.submit([&, video, prior_trace, trace = std::move(trace)]() mutable {
          try {
            if (cfg.use_pass2_time || cfg.use_pass2_space) {
              const Pass1Result p1 = pass1_from_parsed(trace.find(PromptKind::Coarse)->parsed);
              trace.calls.push_back(
                  run_fine_stage(video, cfg, client, *frame_source, p1.t1, prior_trace));
              journal.append_call(video.id, video.duration, trace.calls.back());
            }
            typing_pool.submit([&, video, prior_trace, trace = std::move(trace)]() mutable {
              try {
                if (cfg.use_specialist_type) {
                  const Pass1Result p1 =
                      pass1_from_parsed(trace.find(PromptKind::Coarse)->parsed);
                  const Prediction interim = interim_prediction(trace, cfg);
                  trace.calls.push_back(run_typing_stage(
                      video, cfg, client, *frame_source, interim.t_star,
                      {p1.raw_x1 / 1000.0, p1.raw_y1 / 1000.0}, prior_trace));
                  journal.append_call(video.id, video.duration, trace.calls.back());
                }
                trace.prediction = derive_prediction(trace, cfg);
                finish(std::move(trace));
              } catch (const std::exception& e) {
                fail_video(video, e.what());
              }
            });
          } catch (const std::exception& e) {
            fail_video(video, e.what());
          }
        });
      } catch (const std::exception& e) {
        fail_video(video, e.what());
      }
    });
  }

  latch.wait();
  pass1_pool.shutdown();
  pass2_pool.shutdown();
  typing_pool.shutdown();

  // Canonical outputs, id-sorted regardless of completion order.
  std::vector<PassTrace> traces;
  std::vector<PredictionRow> rows;
  traces.reserve(done.size());
  for (auto& [id, t] : done) {
    rows.push_back(t.prediction->row());
    traces.push_back(std::move(t));
  }
  write_traces_jsonl(traces_path, traces);
  std::error_code ec;
  fs::remove(journal_path, ec);
  write_predictions_csv(predictions_path, rows);

  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file(report_path, report.to_json().dump(2) + "\n");
  write_file(config_path, cfg.to_json().dump(2) + "\n");
  return report;
}

}  // namespace twopass
