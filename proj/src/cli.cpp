#include "twopass/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "twopass/diagnostics.hpp"
#include "twopass/evaluator.hpp"
#include "twopass/mock_vlm.hpp"
#include "twopass/pipeline.hpp"

namespace fs = std::filesystem;

namespace twopass {

namespace {

using nlohmann::json;

std::string summary_text(const Summary& s) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "n=%zu  T=%.6f  S=%.6f  C=%.6f  ACC_S=%.6f", s.n, s.mean_T, s.mean_S,
                s.mean_C, s.acc_s);
  return buf;
}

json summary_json(const Summary& s) {
  return json{{"n", s.n}, {"T", s.mean_T}, {"S", s.mean_S}, {"C", s.mean_C}, {"acc_s", s.acc_s}};
}

// Layered resolution: defaults < config file < endpoint env vars < flags.
// Secrets only ever come from the environment.
struct ConfigLayers {
  std::string config_path;
  json flag_overrides = json::object();
  std::string mock_endpoint;

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) {
      json j = json::parse(read_file(config_path), nullptr, false);
      if (j.is_discarded()) throw InputError("config file is not valid JSON: " + config_path);
      cfg.merge_json(j);
    }
    if (const char* e = std::getenv("GROUNDING_ENDPOINT"); e && *e) cfg.grounding_endpoint = e;
    if (const char* e = std::getenv("TYPING_ENDPOINT"); e && *e) cfg.typing_endpoint = e;
    cfg.merge_json(flag_overrides);
    if (!mock_endpoint.empty()) {
      cfg.grounding_endpoint = mock_endpoint;
      cfg.typing_endpoint = mock_endpoint;
      cfg.grounding_api_key_env.clear();
      cfg.typing_api_key_env.clear();
    }
    cfg.validate();
    return cfg;
  }
};

// Registers the shared config options on a subcommand; each provided flag
// lands in layers.flag_overrides so resolution order stays explicit.
void add_config_options(CLI::App* cmd, ConfigLayers& layers) {
  cmd->add_option("--config", layers.config_path, "JSON config file");
  auto bind_double = [cmd, &layers](const std::string& flag, const std::string& key,
                                    const std::string& help) {
    cmd->add_option_function<double>(
           flag, [&layers, key](double v) { layers.flag_overrides[key] = v; }, help)
        ->expected(1);
  };
  auto bind_int = [cmd, &layers](const std::string& flag, const std::string& key,
                                 const std::string& help) {
    cmd->add_option_function<int>(
           flag, [&layers, key](int v) { layers.flag_overrides[key] = v; }, help)
        ->expected(1);
  };
  auto bind_bool = [cmd, &layers](const std::string& flag, const std::string& key,
                                  const std::string& help) {
    cmd->add_option_function<bool>(
           flag, [&layers, key](bool v) { layers.flag_overrides[key] = v; }, help)
        ->expected(1);
  };
  auto bind_string = [cmd, &layers](const std::string& flag, const std::string& key,
                                    const std::string& help) {
    cmd->add_option_function<std::string>(
           flag, [&layers, key](const std::string& v) { layers.flag_overrides[key] = v; }, help)
        ->expected(1);
  };

  bind_double("--window-delta", "window_delta", "refinement window half-width (s)");
  bind_double("--tau", "tau", "temporal boundary tolerance (s)");
  bind_double("--margin", "margin", "spatial margin on the [0,1000] grid (0 disables)");
  bind_double("--crop-factor", "crop_factor", "type-clip crop divisor");
  bind_double("--sigma-t", "sigma_t", "temporal metric sigma (s)");
  bind_double("--sigma-x", "sigma_x", "spatial metric sigma, x");
  bind_double("--sigma-y", "sigma_y", "spatial metric sigma, y");
  bind_int("--max-retries", "max_retries", "retries per call after the first attempt");
  bind_double("--backoff-base", "backoff_base_s", "retry backoff base (s)");
  bind_double("--request-timeout", "request_timeout_s", "per-request timeout (s)");
  bind_bool("--use-pass2-time", "use_pass2_time", "enable fine-pass time refinement");
  bind_bool("--use-pass2-space", "use_pass2_space", "enable fine-pass spatial merge");
  bind_bool("--use-specialist-type", "use_specialist_type", "enable the specialist typing call");
  bind_string("--extractor-cmd", "extractor_cmd",
              "decoder command template ({input} {timestamp} {long_edge} {crop}); "
              "empty uses the directory-of-images backend");
  bind_string("--fallback-cmd", "fallback_cmd", "external fallback predictor command template");
  bind_string("--grounding-endpoint", "grounding_endpoint", "grounding provider URL");
  bind_string("--grounding-model", "grounding_model", "grounding model identifier");
  bind_string("--typing-endpoint", "typing_endpoint", "typing provider URL");
  bind_string("--typing-model", "typing_model", "typing model identifier");
}

std::map<std::string, double> durations_from_traces(const std::vector<PassTrace>& traces) {
  std::map<std::string, double> out;
  for (const auto& t : traces) out[t.video_id] = t.duration;
  return out;
}

std::vector<std::pair<std::string, double>> read_error_series_csv(const std::string& path) {
  std::vector<std::pair<std::string, double>> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (lineno == 1 && fields.size() >= 2 && to_lower(fields[0]) == "video_id") continue;
    if (fields.size() != 2)
      throw InputError(path + ": line " + std::to_string(lineno) + ": expected video_id,error");
    auto v = parse_strict_double(fields[1]);
    if (!v) throw InputError(path + ": line " + std::to_string(lineno) + ": not a number");
    out.emplace_back(trim(fields[0]), *v);
  }
  return out;
}

void write_if_outdir(const std::string& out_dir, const std::string& name,
                     const std::string& content) {
  if (out_dir.empty()) return;
  fs::create_directories(out_dir);
  write_file((fs::path(out_dir) / name).string(), content);
}

int run_command(const std::string& manifest_path, const ConfigLayers& layers,
                const std::string& out_dir, const std::string& fallback_flag) {
  ConfigLayers effective = layers;
  if (!fallback_flag.empty())
    effective.flag_overrides["fallback_mode"] = fallback_mode_from_string(fallback_flag) ==
                                                        FallbackMode::NaiveFill
                                                    ? "naive"
                                                    : "plugin";
  RunConfig cfg = effective.resolve();
  if (cfg.grounding_endpoint.empty() || cfg.typing_endpoint.empty())
    throw ConfigError("provider endpoints not configured (flags, config file, or "
                      "GROUNDING_ENDPOINT/TYPING_ENDPOINT)");
  auto manifest = read_manifest_csv(manifest_path);
  if (manifest.empty()) throw InputError("manifest has no rows: " + manifest_path);

  HttpVlmClient client;
  RunReport report = run_batch(manifest, cfg, client, out_dir);
  std::cout << "run complete: " << report.videos << " videos (" << report.replayed
            << " replayed from trace), " << report.fallbacks << " fallback rows\n";
  std::cout << "pass1 failures: " << report.pass1.failed << "/" << report.pass1.attempted
            << "  pass2: " << report.pass2.failed << "/" << report.pass2.attempted
            << "  typing: " << report.typing.failed << "/" << report.typing.attempted << "\n";
  for (const auto& e : report.errors) std::cout << "note: " << e << "\n";
  std::cout << "outputs in " << out_dir << "\n";
  return 0;
}

int score_command(const std::string& pred_path, const std::string& gt_path,
                  const ConfigLayers& layers, int bootstrap_n, std::uint64_t seed,
                  const std::string& paired_path, const std::string& json_path,
                  const std::string& out_dir) {
  RunConfig cfg = layers.resolve();
  const MetricParams params{cfg.sigma_t, cfg.sigma_x, cfg.sigma_y};
  auto preds = read_predictions_csv(pred_path);
  auto gts = read_ground_truth_csv(gt_path);
  auto rows = score_rows(preds, gts, params);
  const Summary summary = dataset_summary(rows);

  json out = summary_json(summary);
  std::cout << summary_text(summary) << "\n";

  if (bootstrap_n > 0) {
    auto [lo, hi] = bootstrap_ci(rows, bootstrap_n, 0.95, seed);
    std::printf("bootstrap 95%% CI (%d resamples, seed %llu): [%.6f, %.6f]\n", bootstrap_n,
                static_cast<unsigned long long>(seed), lo, hi);
    out["ci"] = json::array({lo, hi});
    out["bootstrap_resamples"] = bootstrap_n;
    out["seed"] = seed;
  }
  if (!paired_path.empty()) {
    auto other_rows = score_rows(read_predictions_csv(paired_path), gts, params);
    const int n = bootstrap_n > 0 ? bootstrap_n : 1000;
    auto pb = paired_bootstrap(rows, other_rows, n, seed);
    std::printf("paired bootstrap vs %s: delta=%.6f  p=%.6g\n", paired_path.c_str(),
                pb.delta_mean, pb.p_two_sided);
    out["paired"] = json{{"other", paired_path},
                         {"delta_mean", pb.delta_mean},
                         {"p_two_sided", pb.p_two_sided}};
  }
  if (!json_path.empty()) write_file(json_path, out.dump(2) + "\n");
  if (!out_dir.empty()) {
    write_if_outdir(out_dir, "score.json", out.dump(2) + "\n");
    write_if_outdir(out_dir, "config.json", cfg.to_json().dump(2) + "\n");
  }
  return 0;
}

int diagnose_command(const std::string& pred_path, const std::string& gt_path,
                     const std::string& traces_path, const ConfigLayers& layers,
                     const std::string& oracle_path, const std::string& out_dir) {
  RunConfig cfg = layers.resolve();
  const MetricParams params{cfg.sigma_t, cfg.sigma_x, cfg.sigma_y};
  auto preds = read_predictions_csv(pred_path);
  auto gts = read_ground_truth_csv(gt_path);
  auto traces = read_traces_jsonl(traces_path);

  auto stats = signed_error_stats(preds, gts);
  auto buckets = mae_by_duration(preds, gts, durations_from_traces(traces));
  auto confusion = confusion_matrix(preds, gts);
  auto per_type = per_type_table(preds, gts, params);
  auto decomposition = fallback_decomposition(traces, gts, params);

  std::cout << to_text(stats) << to_text(buckets) << to_text(confusion) << to_text(per_type)
            << to_text(decomposition);
  write_if_outdir(out_dir, "signed_error.csv", to_csv(stats));
  write_if_outdir(out_dir, "mae_by_duration.csv", to_csv(buckets));
  write_if_outdir(out_dir, "confusion.csv", to_csv(confusion));
  write_if_outdir(out_dir, "per_type.csv", to_csv(per_type));
  write_if_outdir(out_dir, "fallback_decomposition.csv", to_csv(decomposition));

  if (!oracle_path.empty()) {
    // Own signed temporal errors vs an externally supplied series.
    std::map<std::string, const GroundTruth*> gt_by_id;
    for (const auto& g : gts) gt_by_id[g.video_id] = &g;
    std::vector<std::pair<std::string, double>> own;
    for (const auto& p : preds) {
      auto it = gt_by_id.find(p.video_id);
      if (it != gt_by_id.end()) own.emplace_back(p.video_id, p.t - it->second->t);
    }
    auto other = read_error_series_csv(oracle_path);
    // Restrict both series to the shared id set; the oracle needs pairs.
    std::map<std::string, double> other_by_id(other.begin(), other.end());
    std::vector<std::pair<std::string, double>> own_joined, other_joined;
    for (const auto& [id, e] : own) {
      auto it = other_by_id.find(id);
      if (it != other_by_id.end()) {
        own_joined.emplace_back(id, e);
        other_joined.emplace_back(id, it->second);
      }
    }
    auto oracle = oracle_mae(own_joined, other_joined);
    std::cout << to_text(oracle);
    write_if_outdir(out_dir, "oracle_mae.csv", to_csv(oracle));
  }
  if (!out_dir.empty()) write_if_outdir(out_dir, "config.json", cfg.to_json().dump(2) + "\n");
  return 0;
}

int sweep_command(const std::string& traces_path, const std::string& gt_path,
                  const ConfigLayers& layers, std::vector<double> tau_grid,
                  std::vector<double> m_grid, const std::string& out_dir) {
  RunConfig cfg = layers.resolve();
  auto traces = read_traces_jsonl(traces_path);
  auto gts = read_ground_truth_csv(gt_path);
  if (tau_grid.empty()) tau_grid = kDefaultTauGrid;
  if (m_grid.empty()) m_grid = kDefaultMarginGrid;
  auto tables = sweep_gates(traces, gts, tau_grid, m_grid, cfg);
  std::cout << to_text(tables);
  write_if_outdir(out_dir, "sweep.csv", to_csv(tables));
  if (!out_dir.empty()) write_if_outdir(out_dir, "config.json", cfg.to_json().dump(2) + "\n");
  return 0;
}

int ablate_command(const std::string& traces_path, const std::string& gt_path,
                   const ConfigLayers& layers, const std::string& out_dir) {
  RunConfig cfg = layers.resolve();
  auto traces = read_traces_jsonl(traces_path);
  auto gts = read_ground_truth_csv(gt_path);
  auto rows = ablation_report(traces, gts, cfg);
  std::cout << to_text(rows);
  write_if_outdir(out_dir, "ablation.csv", to_csv(rows));
  if (!out_dir.empty()) write_if_outdir(out_dir, "config.json", cfg.to_json().dump(2) + "\n");
  return 0;
}

int mock_serve_command(const std::string& script_path, double failure_rate, std::uint64_t seed,
                       int port, const std::string& record_upstream,
                       const std::string& record_script, double hold_seconds) {
  MockScript script;
  if (!script_path.empty()) script = MockScript::load_jsonl(script_path);
  MockServerOptions opts;
  opts.failure_rate = failure_rate;
  opts.seed = seed;
  opts.timeout_hold_s = hold_seconds;
  opts.record_upstream = record_upstream;
  opts.record_script_path = record_script;
  MockVlmServer server(std::move(script), opts);
  server.start(port);
  std::cout << "mock VLM server listening on " << server.endpoint() << "\n";
  if (!record_upstream.empty())
    std::cout << "recording upstream " << record_upstream << " into " << record_script << "\n";
  std::cout << "Ctrl-C to stop\n";
  for (;;) std::this_thread::sleep_for(std::chrono::seconds(1));
  return 0;  // unreachable
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"two-pass VLM grounding pipeline and benchmark evaluator"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "ground every manifest video end to end");
  std::string manifest_path, run_out, mock_endpoint, fallback_flag;
  ConfigLayers run_layers;
  run->add_option("--manifest", manifest_path, "CSV: video_id,path,duration,width,height")
      ->required();
  run->add_option("--out", run_out, "output directory")->required();
  run->add_option("--mock-endpoint", run_layers.mock_endpoint,
                  "route both providers to this URL (no credentials required)");
  run->add_option("--fallback", fallback_flag, "fallback route: naive|plugin");
  add_config_options(run, run_layers);

  // score
  auto* score = app.add_subcommand("score", "score a predictions CSV against ground truth");
  std::string score_pred, score_gt, score_paired, score_json, score_out;
  int score_bootstrap = 0;
  std::uint64_t score_seed = 42;
  ConfigLayers score_layers;
  score->add_option("--pred", score_pred, "predictions CSV")->required();
  score->add_option("--gt", score_gt, "ground-truth CSV")->required();
  score->add_option("--bootstrap", score_bootstrap, "bootstrap resamples for a 95% CI");
  score->add_option("--seed", score_seed, "bootstrap seed");
  score->add_option("--paired", score_paired, "second predictions CSV for a paired bootstrap");
  score->add_option("--json", score_json, "write machine-readable summary JSON here");
  score->add_option("--out", score_out, "output directory for summary artifacts");
  add_config_options(score, score_layers);

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "failure-mode tables from predictions + traces");
  std::string diag_pred, diag_gt, diag_traces, diag_oracle, diag_out;
  ConfigLayers diag_layers;
  diag->add_option("--pred", diag_pred, "predictions CSV")->required();
  diag->add_option("--gt", diag_gt, "ground-truth CSV")->required();
  diag->add_option("--traces", diag_traces, "trace JSONL from a run")->required();
  diag->add_option("--oracle-errors", diag_oracle,
                   "CSV video_id,error with a second temporal error series");
  diag->add_option("--out", diag_out, "output directory for CSV tables");
  add_config_options(diag, diag_layers);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "gate threshold sweeps, offline from traces");
  std::string sweep_traces, sweep_gt, sweep_out;
  std::vector<double> tau_grid, m_grid;
  ConfigLayers sweep_layers;
  sweep->add_option("--traces", sweep_traces, "trace JSONL from a run")->required();
  sweep->add_option("--gt", sweep_gt, "ground-truth CSV")->required();
  sweep->add_option("--tau-grid", tau_grid, "tau values")->delimiter(',');
  sweep->add_option("--m-grid", m_grid, "margin values")->delimiter(',');
  sweep->add_option("--out", sweep_out, "output directory for CSV tables");
  add_config_options(sweep, sweep_layers);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "component ablation, offline from traces");
  std::string ablate_traces, ablate_gt, ablate_out;
  ConfigLayers ablate_layers;
  ablate->add_option("--traces", ablate_traces, "trace JSONL from a run")->required();
  ablate->add_option("--gt", ablate_gt, "ground-truth CSV")->required();
  ablate->add_option("--out", ablate_out, "output directory for CSV tables");
  add_config_options(ablate, ablate_layers);

  // mock-serve
  auto* mock = app.add_subcommand("mock-serve", "deterministic scripted VLM endpoint");
  std::string mock_script, mock_record_upstream, mock_record_script;
  double mock_failure_rate = 0.0, mock_hold = 6.0;
  std::uint64_t mock_seed = 0;
  int mock_port = 8099;
  mock->add_option("--script", mock_script, "script JSONL");
  mock->add_option("--failure-rate", mock_failure_rate,
                   "forced coarse-pass failure probability per video id");
  mock->add_option("--seed", mock_seed, "failure-injection seed");
  mock->add_option("--port", mock_port, "listen port");
  mock->add_option("--record-upstream", mock_record_upstream,
                   "proxy to this endpoint and record replies");
  mock->add_option("--record-script", mock_record_script, "where recorded entries are written");
  mock->add_option("--hold-seconds", mock_hold, "stall duration for timeout behavior");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (run->parsed())
      return run_command(manifest_path, run_layers, run_out, fallback_flag);
    if (score->parsed())
      return score_command(score_pred, score_gt, score_layers, score_bootstrap, score_seed,
                           score_paired, score_json, score_out);
    if (diag->parsed())
      return diagnose_command(diag_pred, diag_gt, diag_traces, diag_layers, diag_oracle, diag_out);
    if (sweep->parsed())
      return sweep_command(sweep_traces, sweep_gt, sweep_layers, tau_grid, m_grid, sweep_out);
    if (ablate->parsed())
      return ablate_command(ablate_traces, ablate_gt, ablate_layers, ablate_out);
    if (mock->parsed())
      return mock_serve_command(mock_script, mock_failure_rate, mock_seed, mock_port,
                                mock_record_upstream, mock_record_script, mock_hold);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace twopass
