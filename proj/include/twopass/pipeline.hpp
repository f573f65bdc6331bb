#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "twopass/config.hpp"
#include "twopass/evaluator.hpp"
#include "twopass/gates.hpp"
#include "twopass/gateway.hpp"
#include "twopass/parser.hpp"
#include "twopass/sampler.hpp"
#include "twopass/types.hpp"

namespace twopass {

// Trace file that cannot support the requested offline derivation.
struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TypeSource { Specialist, Pass1Backup, Fallback };

std::string to_string(Source s);
std::string to_string(TypeSource s);

struct Provenance {
  bool pass1_ok = false;
  bool pass2_ok = false;
  bool typing_ok = false;
  Source time_source = Source::Pass1;
  Source space_source = Source::Pass1;
  TypeSource type_source = TypeSource::Fallback;
};

struct Prediction {
  std::string video_id;
  double t_star = 0.0;
  double x_star = 0.0;
  double y_star = 0.0;
  CollisionType c_star = CollisionType::Single;
  Provenance provenance;

  PredictionRow row() const { return {video_id, t_star, x_star, y_star, c_star}; }
  nlohmann::json to_json() const;
  static Prediction from_json(const nlohmann::json& j);
};

// One model call as persisted: enough to re-run the gates, sweeps and
// ablations offline without touching any endpoint. Wall-clock latency is
// deliberately not part of the persisted record (the run report carries
// aggregate timings); trace bytes depend only on request/response content.
struct CallTrace {
  PromptKind kind = PromptKind::Coarse;
  std::string fingerprint;
  bool ok = false;  // transport + envelope success
  int attempts = 0;
  std::string raw_text;
  std::string error;  // transport/extraction failure reason
  bool parse_ok = false;
  std::string parse_error;
  nlohmann::json parsed;  // coarse: time,x,y,type; fine: time,x,y; type: type
  std::optional<std::pair<double, double>> window;  // fine calls only
  double latency_s = 0.0;  // in-memory only, aggregated into the run report

  nlohmann::json to_json() const;
  static CallTrace from_json(const nlohmann::json& j);
};

struct PassTrace {
  std::string video_id;
  double duration = 0.0;
  std::vector<CallTrace> calls;
  std::optional<Prediction> prediction;

  const CallTrace* find(PromptKind kind) const;
  nlohmann::json to_json() const;
  static PassTrace from_json(const nlohmann::json& j);
};

// ---- fallback ----

// Trivial defaults: midpoint time, image center, majority class.
Prediction naive_fill(const VideoRecord& video);

// Runs the configured fallback route. PhysicsPlugin mode shells out to
// `fallback_cmd` ({input}, {id}, {duration}, {width}, {height} placeholders;
// stdout: "time,x,y,type" or a full prediction row); any plugin failure
// degrades to naive_fill.
class FallbackRunner {
 public:
  explicit FallbackRunner(const RunConfig& cfg);
  Prediction run(const VideoRecord& video) const;

 private:
  FallbackMode mode_;
  std::string command_;
};

// ---- core per-video procedure ----

// Re-derives the final tuple from a persisted trace under `cfg`. Pure: the
// online path uses the same function, so offline re-gating reproduces run
// output bit-for-bit. Requires the recorded fallback prediction when the
// coarse pass failed.
Prediction derive_prediction(const PassTrace& trace, const RunConfig& cfg);

// Executes the full procedure for one video: coarse pass, refinement pass,
// both gates, specialist typing, fallbacks. `prior` supplies already-traced
// calls to reuse (resume); reused calls never touch the network.
PassTrace ground_video(const VideoRecord& video, const RunConfig& cfg, VlmClient& client,
                       FrameSource& frames, const FallbackRunner& fallback,
                       const PassTrace* prior = nullptr);

// ---- batch ----

struct StageStats {
  std::uint64_t attempted = 0;
  std::uint64_t failed = 0;  // call or parse failure
  double total_latency_s = 0.0;
  double total_attempts = 0.0;
};

struct RunReport {
  std::size_t videos = 0;
  std::size_t replayed = 0;
  StageStats pass1, pass2, typing;
  std::size_t fallbacks = 0;
  std::size_t plugin_degradations = 0;
  std::vector<std::string> errors;
  double wall_time_s = 0.0;

  nlohmann::json to_json() const;
};

std::vector<VideoRecord> read_manifest_csv(const std::string& path);

// Runs every manifest video under bounded per-stage worker pools, persisting
// an append-only journal while in flight and compacting it into a canonical,
// id-sorted trace file on completion. Videos whose trace is already complete
// are replayed without any network traffic. Outputs: predictions.csv,
// traces.jsonl, run_report.json, config.json under `out_dir`.
RunReport run_batch(const std::vector<VideoRecord>& manifest, const RunConfig& cfg,
                    VlmClient& client, const std::string& out_dir);

// Trace file helpers (shared with diagnostics and the CLI).
std::vector<PassTrace> read_traces_jsonl(const std::string& path);
void write_traces_jsonl(const std::string& path, const std::vector<PassTrace>& traces);

}  // namespace twopass
