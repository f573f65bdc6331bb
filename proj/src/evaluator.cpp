#include "twopass/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "twopass/util.hpp"

namespace twopass {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  if (sorted.size() == 1) return sorted[0];
  double h = q * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

bool looks_like_header(const std::vector<std::string>& fields) {
  return !fields.empty() && to_lower(fields[0]) == "video_id";
}

double require_number(const std::string& field, const std::string& path, std::size_t lineno) {
  auto v = parse_strict_double(field);
  if (!v)
    throw InputError(path + ": line " + std::to_string(lineno) + ": not a number: " + field);
  return *v;
}

CollisionType require_type(const std::string& field, const std::string& path, std::size_t lineno) {
  auto t = normalize_type(field);
  if (!t.ok())
    throw InputError(path + ": line " + std::to_string(lineno) + ": " + t.error);
  return *t;
}

}  // namespace

double temporal_score(double t_pred, double t_gt, double sigma_t) {
  const double d = t_pred - t_gt;
  return std::exp(-(d * d) / (2.0 * sigma_t * sigma_t));
}

double spatial_score(NormPoint pred, NormPoint gt, double sigma_x, double sigma_y) {
  const double dx = pred.x - gt.x;
  const double dy = pred.y - gt.y;
  return std::exp(-((dx * dx) / (2.0 * sigma_x * sigma_x) +
                    (dy * dy) / (2.0 * sigma_y * sigma_y)));
}

double type_score(CollisionType pred, CollisionType gt) { return pred == gt ? 1.0 : 0.0; }

double harmonic_mean3(double a, double b, double c) {
  if (a <= 0.0 || b <= 0.0 || c <= 0.0) return 0.0;
  return 3.0 / (1.0 / a + 1.0 / b + 1.0 / c);
}

ScoreRow score_video(const PredictionRow& pred, const GroundTruth& gt,
                     const MetricParams& params) {
  if (pred.video_id != gt.video_id)
    throw InputError("score_video id mismatch: " + pred.video_id + " vs " + gt.video_id);
  ScoreRow row;
  row.video_id = pred.video_id;
  row.T = temporal_score(pred.t, gt.t, params.sigma_t);
  row.S = spatial_score({pred.x, pred.y}, {gt.x, gt.y}, params.sigma_x, params.sigma_y);
  row.C = type_score(pred.type, gt.type);
  row.hm = harmonic_mean3(row.T, row.S, row.C);
  return row;
}

std::vector<ScoreRow> score_rows(const std::vector<PredictionRow>& preds,
                                 const std::vector<GroundTruth>& gts,
                                 const MetricParams& params) {
  std::map<std::string, const GroundTruth*> by_id;
  for (const auto& gt : gts) {
    if (!by_id.emplace(gt.video_id, &gt).second)
      throw InputError("duplicate ground-truth id: " + gt.video_id);
  }
  std::vector<ScoreRow> rows;
  rows.reserve(preds.size());
  std::map<std::string, const PredictionRow*> pred_ids;
  for (const auto& p : preds) {
    if (!pred_ids.emplace(p.video_id, &p).second)
      throw InputError("duplicate prediction id: " + p.video_id);
    auto it = by_id.find(p.video_id);
    if (it == by_id.end())
      throw InputError("prediction id missing from ground truth: " + p.video_id);
  }
  for (const auto& gt : gts) {
    if (!pred_ids.count(gt.video_id))
      throw InputError("ground-truth id missing from predictions: " + gt.video_id);
  }
  // map iteration gives a stable, id-sorted order
  for (const auto& [id, p] : pred_ids) rows.push_back(score_video(*p, *by_id.at(id), params));
  return rows;
}

Summary dataset_summary(const std::vector<ScoreRow>& rows) {
  if (rows.empty()) throw InputError("dataset_summary on empty input");
  Summary s;
  s.n = rows.size();
  for (const auto& r : rows) {
    s.mean_T += r.T;
    s.mean_S += r.S;
    s.mean_C += r.C;
    s.acc_s += r.hm;
  }
  const double n = static_cast<double>(s.n);
  s.mean_T /= n;
  s.mean_S /= n;
  s.mean_C /= n;
  s.acc_s /= n;
  return s;
}

std::pair<double, double> bootstrap_ci(const std::vector<ScoreRow>& rows, int n_resamples,
                                       double level, std::uint64_t seed) {
  if (rows.empty()) throw InputError("bootstrap_ci on empty input");
  if (n_resamples < 1) throw InputError("n_resamples must be >= 1");
  if (level <= 0 || level >= 1) throw InputError("level must be in (0,1)");

  DetRng rng(seed);
  const std::size_t n = rows.size();
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(n_resamples));
  for (int r = 0; r < n_resamples; ++r) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += rows[rng.next_index(n)].hm;
    means.push_back(sum / static_cast<double>(n));
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  return {quantile_sorted(means, alpha), quantile_sorted(means, 1.0 - alpha)};
}

PairedBootstrapResult paired_bootstrap(const std::vector<ScoreRow>& rows_a,
                                       const std::vector<ScoreRow>& rows_b,
                                       int n_resamples, std::uint64_t seed) {
  if (rows_a.empty() || rows_b.empty()) throw InputError("paired_bootstrap on empty input");
  if (n_resamples < 1) throw InputError("n_resamples must be >= 1");

  std::map<std::string, double> b_by_id;
  for (const auto& r : rows_b) b_by_id[r.video_id] = r.hm;
  if (b_by_id.size() != rows_b.size()) throw InputError("duplicate ids in second row set");
  if (rows_a.size() != rows_b.size())
    throw InputError("paired row sets differ in size");

  // Pairwise differences, keyed by id.
  std::vector<double> diffs;
  diffs.reserve(rows_a.size());
  double observed = 0.0;
  for (const auto& r : rows_a) {
    auto it = b_by_id.find(r.video_id);
    if (it == b_by_id.end()) throw InputError("paired id missing from second set: " + r.video_id);
    diffs.push_back(r.hm - it->second);
    observed += diffs.back();
  }
  observed /= static_cast<double>(diffs.size());

  PairedBootstrapResult result;
  result.delta_mean = observed;
  if (observed == 0.0) {
    result.p_two_sided = 1.0;
    return result;
  }

  DetRng rng(seed);
  const std::size_t n = diffs.size();
  int tail = 0;
  for (int r = 0; r < n_resamples; ++r) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += diffs[rng.next_index(n)];
    const double delta = sum / static_cast<double>(n);
    if ((observed > 0.0 && delta <= 0.0) || (observed < 0.0 && delta >= 0.0)) ++tail;
  }
  double p = 2.0 * static_cast<double>(tail) / static_cast<double>(n_resamples);
  p = std::max(p, 1.0 / static_cast<double>(n_resamples));
  result.p_two_sided = std::min(p, 1.0);
  return result;
}

std::vector<PredictionRow> read_predictions_csv(const std::string& path) {
  std::vector<PredictionRow> rows;
  auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto fields = split_csv_line(lines[i]);
    if (i == 0 && looks_like_header(fields)) continue;
    if (fields.size() != 5)
      throw InputError(path + ": line " + std::to_string(i + 1) + ": expected 5 columns");
    PredictionRow row;
    row.video_id = trim(fields[0]);
    row.t = require_number(fields[1], path, i + 1);
    row.x = require_number(fields[2], path, i + 1);
    row.y = require_number(fields[3], path, i + 1);
    row.type = require_type(fields[4], path, i + 1);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_predictions_csv(const std::string& path, const std::vector<PredictionRow>& rows) {
  std::ostringstream out;
  out << "video_id,time,x,y,type\n";
  for (const auto& r : rows) {
    out << csv_escape(r.video_id) << ',' << format_double(r.t) << ',' << format_double(r.x)
        << ',' << format_double(r.y) << ',' << to_string(r.type) << '\n';
  }
  write_file(path, out.str());
}

std::vector<GroundTruth> read_ground_truth_csv(const std::string& path) {
  std::vector<GroundTruth> rows;
  auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto fields = split_csv_line(lines[i]);
    if (i == 0 && looks_like_header(fields)) continue;
    if (fields.size() != 5)
      throw InputError(path + ": line " + std::to_string(i + 1) + ": expected 5 columns");
    GroundTruth row;
    row.video_id = trim(fields[0]);
    row.t = require_number(fields[1], path, i + 1);
    row.x = require_number(fields[2], path, i + 1);
    row.y = require_number(fields[3], path, i + 1);
    row.type = require_type(fields[4], path, i + 1);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace twopass
