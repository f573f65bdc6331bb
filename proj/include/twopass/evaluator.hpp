#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "twopass/parser.hpp"
#include "twopass/types.hpp"

namespace twopass {

// Final tuple as it appears in a predictions CSV row.
struct PredictionRow {
  std::string video_id;
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  CollisionType type = CollisionType::Single;
};

struct GroundTruth {
  std::string video_id;
  double t = 0.0;
  double x = 0.0;  // [0,1]
  double y = 0.0;  // [0,1]
  CollisionType type = CollisionType::Single;
};

struct MetricParams {
  double sigma_t = 1.0;
  double sigma_x = 0.127;
  double sigma_y = 0.119;
};

struct ScoreRow {
  std::string video_id;
  double T = 0.0;
  double S = 0.0;
  double C = 0.0;
  double hm = 0.0;  // per-video harmonic mean; 0 when any component is 0
};

// Unnormalized Gaussian kernels: a perfect prediction scores exactly 1.
double temporal_score(double t_pred, double t_gt, double sigma_t);
double spatial_score(NormPoint pred, NormPoint gt, double sigma_x, double sigma_y);
double type_score(CollisionType pred, CollisionType gt);

// Harmonic mean of three components, defined as 0 when any component is 0.
double harmonic_mean3(double a, double b, double c);

// ids must match; throws InputError otherwise.
ScoreRow score_video(const PredictionRow& pred, const GroundTruth& gt, const MetricParams& params);

// Joins by video_id (every prediction must have a ground-truth row and vice
// versa) and scores each pair. Output is sorted by video_id.
std::vector<ScoreRow> score_rows(const std::vector<PredictionRow>& preds,
                                 const std::vector<GroundTruth>& gts,
                                 const MetricParams& params);

struct Summary {
  std::size_t n = 0;
  double mean_T = 0.0;
  double mean_S = 0.0;
  double mean_C = 0.0;
  double acc_s = 0.0;  // mean of per-video harmonic means, NOT the HM of the means
};

Summary dataset_summary(const std::vector<ScoreRow>& rows);

// Percentile interval of the mean per-video harmonic mean over with-replacement
// resamples. Deterministic for a fixed seed on every platform.
std::pair<double, double> bootstrap_ci(const std::vector<ScoreRow>& rows, int n_resamples,
                                       double level, std::uint64_t seed);

struct PairedBootstrapResult {
  double delta_mean = 0.0;   // observed mean(hm_a - hm_b)
  double p_two_sided = 1.0;  // doubled one-sided tail, floored at 1/n_resamples
};

// Resamples video indices jointly; both row sets must cover the same ids.
PairedBootstrapResult paired_bootstrap(const std::vector<ScoreRow>& rows_a,
                                       const std::vector<ScoreRow>& rows_b,
                                       int n_resamples, std::uint64_t seed);

// ---- CSV round-trips (header: video_id,time,x,y,type) ----

std::vector<PredictionRow> read_predictions_csv(const std::string& path);
void write_predictions_csv(const std::string& path, const std::vector<PredictionRow>& rows);
std::vector<GroundTruth> read_ground_truth_csv(const std::string& path);

}  // namespace twopass
