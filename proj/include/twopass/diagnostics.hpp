#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "twopass/evaluator.hpp"
#include "twopass/pipeline.hpp"

namespace twopass {

// ---- temporal bias ----

struct SignedErrorStats {
  double mean = 0.0;
  double median = 0.0;
  // Fixed 0.5 s bins over [-10, 10) plus overflow buckets on both sides.
  static constexpr double kBinWidth = 0.5;
  static constexpr double kLo = -10.0;
  static constexpr double kHi = 10.0;
  std::vector<std::size_t> bins;  // 40 in-range bins
  std::size_t underflow = 0;
  std::size_t overflow = 0;
  std::size_t n = 0;
};

SignedErrorStats signed_error_stats(const std::vector<PredictionRow>& preds,
                                    const std::vector<GroundTruth>& gts);

// ---- temporal MAE by clip length ----

struct DurationBucketRow {
  std::string label;  // "0-10", "10-20", "20+"
  double lo = 0.0;
  double hi = 0.0;  // +inf for the last bucket
  std::size_t n = 0;
  double mae = 0.0;
};

// Bucket edges are inclusive-left; empty buckets are omitted. `durations`
// maps video_id to clip length.
std::vector<DurationBucketRow> mae_by_duration(const std::vector<PredictionRow>& preds,
                                               const std::vector<GroundTruth>& gts,
                                               const std::map<std::string, double>& durations,
                                               const std::vector<double>& edges = {10.0, 20.0});

// ---- type confusion ----

struct ConfusionMatrix {
  // rows: ground truth, columns: predicted; class order follows CollisionType
  std::array<std::array<std::size_t, 5>, 5> counts{};
  std::array<std::array<double, 5>, 5> row_normalized{};
  std::array<std::size_t, 5> row_totals{};
};

ConfusionMatrix confusion_matrix(const std::vector<PredictionRow>& preds,
                                 const std::vector<GroundTruth>& gts);

// ---- per-type breakdown ----

struct PerTypeRow {
  CollisionType type = CollisionType::Single;
  std::size_t n = 0;
  double T = 0.0;
  double S = 0.0;
  double C = 0.0;
  double acc_s = 0.0;
};

std::vector<PerTypeRow> per_type_table(const std::vector<PredictionRow>& preds,
                                       const std::vector<GroundTruth>& gts,
                                       const MetricParams& params);

// ---- two-channel temporal oracle ----

struct OracleMae {
  double mae_a = 0.0;
  double mae_b = 0.0;
  double mae_oracle = 0.0;  // per-video min of absolute errors, averaged
};

OracleMae oracle_mae(const std::vector<std::pair<std::string, double>>& errors_a,
                     const std::vector<std::pair<std::string, double>>& errors_b);

// ---- fallback decomposition ----

struct SubsetSummary {
  std::string name;
  std::size_t n = 0;
  Summary summary;  // meaningful only when n > 0
};

struct FallbackDecomposition {
  SubsetSummary vlm_success;
  SubsetSummary fallback;
  SubsetSummary full;
  SubsetSummary naive_counterfactual;  // fallback rows replaced by naive_fill
};

FallbackDecomposition fallback_decomposition(const std::vector<PassTrace>& traces,
                                             const std::vector<GroundTruth>& gts,
                                             const MetricParams& params);

// ---- offline re-gating: sweeps and ablations ----

struct SweepRow {
  double value = 0.0;  // the swept threshold
  Summary summary;
};

struct SweepTables {
  std::vector<SweepRow> tau_rows;  // margin held at cfg default
  std::vector<SweepRow> m_rows;    // tau held at cfg default
};

// Re-runs the gates offline from persisted traces (no network) for each grid
// value and rescores. Throws TraceError naming the video when a trace cannot
// support re-derivation.
SweepTables sweep_gates(const std::vector<PassTrace>& traces,
                        const std::vector<GroundTruth>& gts,
                        const std::vector<double>& tau_grid,
                        const std::vector<double>& m_grid, const RunConfig& cfg);

inline const std::vector<double> kDefaultTauGrid{0.1, 0.2, 0.3, 0.5, 1.0};
inline const std::vector<double> kDefaultMarginGrid{0.0, 5.0, 10.0, 20.0, 50.0};

struct AblationRow {
  std::string name;
  double T_sigma1 = 0.0;
  double T_sigma2 = 0.0;  // sigma_t doubled
  double S = 0.0;
  double C = 0.0;
  double acc_s = 0.0;  // at sigma_t
};

// The four cumulative configurations, re-derived offline from traces:
// coarse only, +specialist type, +fine time, +fine space.
std::vector<AblationRow> ablation_report(const std::vector<PassTrace>& traces,
                                         const std::vector<GroundTruth>& gts,
                                         const RunConfig& cfg);

// Checks that every trace can support offline derivation; throws TraceError
// naming the first offending video.
void validate_traces_for_offline(const std::vector<PassTrace>& traces);

// Offline derivation of prediction rows for one configuration.
std::vector<PredictionRow> derive_rows(const std::vector<PassTrace>& traces,
                                       const RunConfig& cfg);

// ---- rendering ----

std::string to_csv(const SignedErrorStats& s);
std::string to_csv(const std::vector<DurationBucketRow>& rows);
std::string to_csv(const ConfusionMatrix& m);
std::string to_csv(const std::vector<PerTypeRow>& rows);
std::string to_csv(const FallbackDecomposition& d);
std::string to_csv(const SweepTables& t);
std::string to_csv(const std::vector<AblationRow>& rows);
std::string to_csv(const OracleMae& o);

std::string to_text(const SignedErrorStats& s);
std::string to_text(const std::vector<DurationBucketRow>& rows);
std::string to_text(const ConfusionMatrix& m);
std::string to_text(const std::vector<PerTypeRow>& rows);
std::string to_text(const FallbackDecomposition& d);
std::string to_text(const SweepTables& t);
std::string to_text(const std::vector<AblationRow>& rows);
std::string to_text(const OracleMae& o);

}  // namespace twopass
