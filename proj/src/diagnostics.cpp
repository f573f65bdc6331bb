#include "twopass/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace twopass {

namespace {

struct Joined {
  const PredictionRow* pred;
  const GroundTruth* gt;
};

std::vector<Joined> join_by_id(const std::vector<PredictionRow>& preds,
                               const std::vector<GroundTruth>& gts) {
  if (preds.empty() || gts.empty()) throw InputError("empty prediction/ground-truth join");
  std::map<std::string, const GroundTruth*> gt_by_id;
  for (const auto& g : gts) {
    if (!gt_by_id.emplace(g.video_id, &g).second)
      throw InputError("duplicate ground-truth id: " + g.video_id);
  }
  std::map<std::string, Joined> joined;
  for (const auto& p : preds) {
    auto it = gt_by_id.find(p.video_id);
    if (it == gt_by_id.end())
      throw InputError("prediction id missing from ground truth: " + p.video_id);
    if (!joined.emplace(p.video_id, Joined{&p, it->second}).second)
      throw InputError("duplicate prediction id: " + p.video_id);
  }
  if (joined.size() != gts.size())
    throw InputError("prediction/ground-truth id sets differ");
  std::vector<Joined> out;
  out.reserve(joined.size());
  for (const auto& [id, j] : joined) out.push_back(j);
  return out;
}

std::size_t type_index(CollisionType t) {
  for (std::size_t i = 0; i < kCollisionTypes.size(); ++i) {
    if (kCollisionTypes[i] == t) return i;
  }
  return 0;
}

double mean_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return xs.empty() ? 0.0 : sum / static_cast<double>(xs.size());
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

Summary summarize_subset(const std::vector<ScoreRow>& rows) { return dataset_summary(rows); }

}  // namespace

SignedErrorStats signed_error_stats(const std::vector<PredictionRow>& preds,
                                    const std::vector<GroundTruth>& gts) {
  auto joined = join_by_id(preds, gts);
  SignedErrorStats stats;
  const std::size_t n_bins = static_cast<std::size_t>(
      std::llround((SignedErrorStats::kHi - SignedErrorStats::kLo) / SignedErrorStats::kBinWidth));
  stats.bins.assign(n_bins, 0);

  std::vector<double> errors;
  errors.reserve(joined.size());
  for (const auto& j : joined) {
    const double e = j.pred->t - j.gt->t;
    errors.push_back(e);
    if (e < SignedErrorStats::kLo) {
      ++stats.underflow;
    } else if (e >= SignedErrorStats::kHi) {
      ++stats.overflow;
    } else {
      auto k = static_cast<std::size_t>(
          std::floor((e - SignedErrorStats::kLo) / SignedErrorStats::kBinWidth));
      ++stats.bins[std::min(k, n_bins - 1)];
    }
  }
  stats.n = errors.size();
  stats.mean = mean_of(errors);
  std::sort(errors.begin(), errors.end());
  const std::size_t m = errors.size();
  stats.median = m % 2 == 1 ? errors[m / 2] : (errors[m / 2 - 1] + errors[m / 2]) / 2.0;
  return stats;
}

std::vector<DurationBucketRow> mae_by_duration(const std::vector<PredictionRow>& preds,
                                               const std::vector<GroundTruth>& gts,
                                               const std::map<std::string, double>& durations,
                                               const std::vector<double>& edges) {
  auto joined = join_by_id(preds, gts);
  std::vector<DurationBucketRow> rows;
  // edges e1 < e2 < ... build buckets [0,e1), [e1,e2), ..., [elast, inf)
  std::vector<double> lo{0.0};
  for (double e : edges) lo.push_back(e);
  for (std::size_t b = 0; b < lo.size(); ++b) {
    DurationBucketRow row;
    row.lo = lo[b];
    row.hi = b + 1 < lo.size() ? lo[b + 1] : std::numeric_limits<double>::infinity();
    char label[48];
    if (std::isinf(row.hi)) std::snprintf(label, sizeof(label), "%g+", row.lo);
    else std::snprintf(label, sizeof(label), "%g-%g", row.lo, row.hi);
    row.label = label;
    rows.push_back(row);
  }
  std::vector<std::vector<double>> abs_errors(rows.size());
  for (const auto& j : joined) {
    auto it = durations.find(j.pred->video_id);
    if (it == durations.end())
      throw InputError("duration unknown for video: " + j.pred->video_id);
    const double d = it->second;
    for (std::size_t b = 0; b < rows.size(); ++b) {
      if (d >= rows[b].lo && d < rows[b].hi) {
        abs_errors[b].push_back(std::fabs(j.pred->t - j.gt->t));
        break;
      }
    }
  }
  std::vector<DurationBucketRow> out;
  for (std::size_t b = 0; b < rows.size(); ++b) {
    if (abs_errors[b].empty()) continue;  // absent, not zero
    rows[b].n = abs_errors[b].size();
    rows[b].mae = mean_of(abs_errors[b]);
    out.push_back(rows[b]);
  }
  return out;
}

ConfusionMatrix confusion_matrix(const std::vector<PredictionRow>& preds,
                                 const std::vector<GroundTruth>& gts) {
  auto joined = join_by_id(preds, gts);
  ConfusionMatrix m;
  for (const auto& j : joined) {
    const std::size_t r = type_index(j.gt->type);
    const std::size_t c = type_index(j.pred->type);
    ++m.counts[r][c];
    ++m.row_totals[r];
  }
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 5; ++c) {
      m.row_normalized[r][c] =
          m.row_totals[r] == 0
              ? 0.0
              : static_cast<double>(m.counts[r][c]) / static_cast<double>(m.row_totals[r]);
    }
  }
  return m;
}

std::vector<PerTypeRow> per_type_table(const std::vector<PredictionRow>& preds,
                                       const std::vector<GroundTruth>& gts,
                                       const MetricParams& params) {
  auto joined = join_by_id(preds, gts);
  std::array<std::vector<ScoreRow>, 5> groups;
  for (const auto& j : joined) {
    groups[type_index(j.gt->type)].push_back(score_video(*j.pred, *j.gt, params));
  }
  std::vector<PerTypeRow> rows;
  for (std::size_t i = 0; i < 5; ++i) {
    if (groups[i].empty()) continue;
    const Summary s = summarize_subset(groups[i]);
    PerTypeRow row;
    row.type = kCollisionTypes[i];
    row.n = s.n;
    row.T = s.mean_T;
    row.S = s.mean_S;
    row.C = s.mean_C;
    row.acc_s = s.acc_s;
    rows.push_back(row);
  }
  return rows;
}

OracleMae oracle_mae(const std::vector<std::pair<std::string, double>>& errors_a,
                     const std::vector<std::pair<std::string, double>>& errors_b) {
  if (errors_a.empty() || errors_b.empty()) throw InputError("oracle_mae on empty input");
  std::map<std::string, double> b_by_id;
  for (const auto& [id, e] : errors_b) {
    if (!b_by_id.emplace(id, e).second) throw InputError("duplicate id in second series: " + id);
  }
  if (b_by_id.size() != errors_a.size())
    throw InputError("oracle_mae: error series differ in id set");
  OracleMae out;
  for (const auto& [id, ea] : errors_a) {
    auto it = b_by_id.find(id);
    if (it == b_by_id.end()) throw InputError("oracle_mae: id missing from second series: " + id);
    const double a = std::fabs(ea);
    const double b = std::fabs(it->second);
    out.mae_a += a;
    out.mae_b += b;
    out.mae_oracle += std::min(a, b);
  }
  const double n = static_cast<double>(errors_a.size());
  out.mae_a /= n;
  out.mae_b /= n;
  out.mae_oracle /= n;
  return out;
}

FallbackDecomposition fallback_decomposition(const std::vector<PassTrace>& traces,
                                             const std::vector<GroundTruth>& gts,
                                             const MetricParams& params) {
  std::vector<PredictionRow> vlm_rows, fallback_rows, full_rows, naive_rows;
  std::vector<GroundTruth> vlm_gt, fallback_gt;
  std::map<std::string, const GroundTruth*> gt_by_id;
  for (const auto& g : gts) gt_by_id[g.video_id] = &g;

  for (const auto& t : traces) {
    if (!t.prediction) throw TraceError("trace for video " + t.video_id + " has no prediction");
    auto it = gt_by_id.find(t.video_id);
    if (it == gt_by_id.end())
      throw InputError("trace id missing from ground truth: " + t.video_id);
    const PredictionRow row = t.prediction->row();
    full_rows.push_back(row);
    const bool is_fallback = t.prediction->provenance.type_source == TypeSource::Fallback;
    if (is_fallback) {
      fallback_rows.push_back(row);
      fallback_gt.push_back(*it->second);
      VideoRecord v;
      v.id = t.video_id;
      v.duration = t.duration;
      naive_rows.push_back(naive_fill(v).row());
    } else {
      vlm_rows.push_back(row);
      vlm_gt.push_back(*it->second);
      naive_rows.push_back(row);
    }
  }

  FallbackDecomposition d;
  d.vlm_success.name = "vlm_success";
  d.vlm_success.n = vlm_rows.size();
  if (!vlm_rows.empty()) d.vlm_success.summary = dataset_summary(score_rows(vlm_rows, vlm_gt, params));
  d.fallback.name = "fallback";
  d.fallback.n = fallback_rows.size();
  if (!fallback_rows.empty())
    d.fallback.summary = dataset_summary(score_rows(fallback_rows, fallback_gt, params));
  d.full.name = "full";
  d.full.n = full_rows.size();
  d.full.summary = dataset_summary(score_rows(full_rows, gts, params));
  d.naive_counterfactual.name = "vlm_plus_naive_fill";
  d.naive_counterfactual.n = naive_rows.size();
  d.naive_counterfactual.summary = dataset_summary(score_rows(naive_rows, gts, params));
  return d;
}

void validate_traces_for_offline(const std::vector<PassTrace>& traces) {
  for (const auto& t : traces) {
    if (!t.prediction)
      throw TraceError("trace for video " + t.video_id + " is incomplete: missing prediction");
    const bool is_fallback = t.prediction->provenance.type_source == TypeSource::Fallback;
    const CallTrace* coarse = t.find(PromptKind::Coarse);
    if (!is_fallback && (!coarse || !coarse->ok || !coarse->parse_ok))
      throw TraceError("trace for video " + t.video_id + " is incomplete: missing coarse record");
  }
}

std::vector<PredictionRow> derive_rows(const std::vector<PassTrace>& traces,
                                       const RunConfig& cfg) {
  std::vector<PredictionRow> rows;
  rows.reserve(traces.size());
  for (const auto& t : traces) rows.push_back(derive_prediction(t, cfg).row());
  return rows;
}

SweepTables sweep_gates(const std::vector<PassTrace>& traces,
                        const std::vector<GroundTruth>& gts,
                        const std::vector<double>& tau_grid,
                        const std::vector<double>& m_grid, const RunConfig& cfg) {
  validate_traces_for_offline(traces);
  const MetricParams params{cfg.sigma_t, cfg.sigma_x, cfg.sigma_y};
  SweepTables tables;
  for (double tau : tau_grid) {
    RunConfig c = cfg;
    c.tau = tau;
    tables.tau_rows.push_back(
        {tau, dataset_summary(score_rows(derive_rows(traces, c), gts, params))});
  }
  for (double m : m_grid) {
    RunConfig c = cfg;
    c.margin = m;
    tables.m_rows.push_back(
        {m, dataset_summary(score_rows(derive_rows(traces, c), gts, params))});
  }
  return tables;
}

std::vector<AblationRow> ablation_report(const std::vector<PassTrace>& traces,
                                         const std::vector<GroundTruth>& gts,
                                         const RunConfig& cfg) {
  validate_traces_for_offline(traces);
  struct Config {
    const char* name;
    bool pass2_time, pass2_space, specialist;
  };
  const Config configs[] = {
      {"pass1_only", false, false, false},
      {"+specialist_type", false, false, true},
      {"+pass2_time", true, false, true},
      {"+pass2_space", true, true, true},
  };
  const MetricParams at_sigma1{cfg.sigma_t, cfg.sigma_x, cfg.sigma_y};
  const MetricParams at_sigma2{2.0 * cfg.sigma_t, cfg.sigma_x, cfg.sigma_y};

  std::vector<AblationRow> rows;
  for (const auto& c : configs) {
    RunConfig rc = cfg;
    rc.use_pass2_time = c.pass2_time;
    rc.use_pass2_space = c.pass2_space;
    rc.use_specialist_type = c.specialist;
    const auto preds = derive_rows(traces, rc);
    const Summary s1 = dataset_summary(score_rows(preds, gts, at_sigma1));
    const Summary s2 = dataset_summary(score_rows(preds, gts, at_sigma2));
    AblationRow row;
    row.name = c.name;
    row.T_sigma1 = s1.mean_T;
    row.T_sigma2 = s2.mean_T;
    row.S = s1.mean_S;
    row.C = s1.mean_C;
    row.acc_s = s1.acc_s;
    rows.push_back(row);
  }
  return rows;
}

// ---- rendering ----

std::string to_csv(const SignedErrorStats& s) {
  std::ostringstream out;
  out << "stat,value\n";
  out << "n," << s.n << "\nmean," << fmt(s.mean) << "\nmedian," << fmt(s.median) << "\n";
  out << "bin_lo,bin_hi,count\n";
  out << "-inf," << fmt(SignedErrorStats::kLo) << "," << s.underflow << "\n";
  for (std::size_t i = 0; i < s.bins.size(); ++i) {
    const double lo = SignedErrorStats::kLo + SignedErrorStats::kBinWidth * static_cast<double>(i);
    out << fmt(lo) << "," << fmt(lo + SignedErrorStats::kBinWidth) << "," << s.bins[i] << "\n";
  }
  out << fmt(SignedErrorStats::kHi) << ",+inf," << s.overflow << "\n";
  return out.str();
}

std::string to_csv(const std::vector<DurationBucketRow>& rows) {
  std::ostringstream out;
  out << "bucket,n,mae_s\n";
  for (const auto& r : rows) out << r.label << "," << r.n << "," << fmt(r.mae) << "\n";
  return out.str();
}

std::string to_csv(const ConfusionMatrix& m) {
  std::ostringstream out;
  out << "gt\\pred";
  for (auto t : kCollisionTypes) out << "," << to_string(t);
  out << ",n\n";
  for (std::size_t r = 0; r < 5; ++r) {
    out << to_string(kCollisionTypes[r]);
    for (std::size_t c = 0; c < 5; ++c) out << "," << fmt(m.row_normalized[r][c]);
    out << "," << m.row_totals[r] << "\n";
  }
  return out.str();
}

std::string to_csv(const std::vector<PerTypeRow>& rows) {
  std::ostringstream out;
  out << "gt_type,n,T,S,C,acc_s\n";
  for (const auto& r : rows) {
    out << to_string(r.type) << "," << r.n << "," << fmt(r.T) << "," << fmt(r.S) << ","
        << fmt(r.C) << "," << fmt(r.acc_s) << "\n";
  }
  return out.str();
}

std::string to_csv(const FallbackDecomposition& d) {
  std::ostringstream out;
  out << "subset,n,T,S,C,acc_s\n";
  for (const SubsetSummary* s :
       {&d.vlm_success, &d.fallback, &d.full, &d.naive_counterfactual}) {
    out << s->name << "," << s->n;
    if (s->n > 0) {
      out << "," << fmt(s->summary.mean_T) << "," << fmt(s->summary.mean_S) << ","
          << fmt(s->summary.mean_C) << "," << fmt(s->summary.acc_s);
    } else {
      out << ",,,,";
    }
    out << "\n";
  }
  return out.str();
}

std::string to_csv(const SweepTables& t) {
  std::ostringstream out;
  out << "threshold,value,T,S,C,acc_s\n";
  for (const auto& r : t.tau_rows) {
    out << "tau," << format_double(r.value) << "," << fmt(r.summary.mean_T) << ","
        << fmt(r.summary.mean_S) << "," << fmt(r.summary.mean_C) << "," << fmt(r.summary.acc_s)
        << "\n";
  }
  for (const auto& r : t.m_rows) {
    out << "margin," << format_double(r.value) << "," << fmt(r.summary.mean_T) << ","
        << fmt(r.summary.mean_S) << "," << fmt(r.summary.mean_C) << "," << fmt(r.summary.acc_s)
        << "\n";
  }
  return out.str();
}

std::string to_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "configuration,T_sigma1,T_sigma2,S,C,acc_s\n";
  for (const auto& r : rows) {
    out << r.name << "," << fmt(r.T_sigma1) << "," << fmt(r.T_sigma2) << "," << fmt(r.S) << ","
        << fmt(r.C) << "," << fmt(r.acc_s) << "\n";
  }
  return out.str();
}

std::string to_csv(const OracleMae& o) {
  std::ostringstream out;
  out << "series,mae_s\n";
  out << "a," << fmt(o.mae_a) << "\nb," << fmt(o.mae_b) << "\noracle," << fmt(o.mae_oracle)
      << "\n";
  return out.str();
}

std::string to_text(const SignedErrorStats& s) {
  std::ostringstream out;
  out << "signed temporal error (pred - gt): n=" << s.n << "  mean=" << fmt(s.mean)
      << " s  median=" << fmt(s.median) << " s\n";
  out << "  histogram: " << s.underflow << " below " << SignedErrorStats::kLo << " s, "
      << s.overflow << " at/above " << SignedErrorStats::kHi << " s, bin width "
      << SignedErrorStats::kBinWidth << " s\n";
  return out.str();
}

std::string to_text(const std::vector<DurationBucketRow>& rows) {
  std::ostringstream out;
  out << "temporal MAE by clip length:\n";
  for (const auto& r : rows)
    out << "  " << r.label << " s: n=" << r.n << "  MAE=" << fmt(r.mae) << " s\n";
  return out.str();
}

std::string to_text(const ConfusionMatrix& m) {
  std::ostringstream out;
  out << "type confusion (rows: ground truth, row-normalized):\n";
  out << "            ";
  for (auto t : kCollisionTypes) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%10s", std::string(to_string(t)).c_str());
    out << buf;
  }
  out << "       n\n";
  for (std::size_t r = 0; r < 5; ++r) {
    char head[16];
    std::snprintf(head, sizeof(head), "%-12s", std::string(to_string(kCollisionTypes[r])).c_str());
    out << head;
    for (std::size_t c = 0; c < 5; ++c) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%10.3f", m.row_normalized[r][c]);
      out << buf;
    }
    char tail[16];
    std::snprintf(tail, sizeof(tail), "%8zu", m.row_totals[r]);
    out << tail << "\n";
  }
  return out.str();
}

std::string to_text(const std::vector<PerTypeRow>& rows) {
  std::ostringstream out;
  out << "per-type breakdown (grouped by ground-truth type):\n";
  out << "  type         n       T       S       C   acc_s\n";
  for (const auto& r : rows) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "  %-10s %4zu  %.4f  %.4f  %.4f  %.4f\n",
                  std::string(to_string(r.type)).c_str(), r.n, r.T, r.S, r.C, r.acc_s);
    out << buf;
  }
  out << "  (pooled acc_s is not the N-weighted mean of group harmonic means)\n";
  return out.str();
}

std::string to_text(const FallbackDecomposition& d) {
  std::ostringstream out;
  out << "fallback decomposition:\n";
  out << "  subset                  n       T       S       C   acc_s\n";
  for (const SubsetSummary* s :
       {&d.vlm_success, &d.fallback, &d.full, &d.naive_counterfactual}) {
    char buf[160];
    if (s->n > 0) {
      std::snprintf(buf, sizeof(buf), "  %-20s %5zu  %.4f  %.4f  %.4f  %.4f\n", s->name.c_str(),
                    s->n, s->summary.mean_T, s->summary.mean_S, s->summary.mean_C,
                    s->summary.acc_s);
    } else {
      std::snprintf(buf, sizeof(buf), "  %-20s %5zu  (absent)\n", s->name.c_str(), s->n);
    }
    out << buf;
  }
  return out.str();
}

std::string to_text(const SweepTables& t) {
  std::ostringstream out;
  out << "gate threshold sweeps (offline, from traces):\n";
  out << "  tau (s)      T       S       C   acc_s\n";
  for (const auto& r : t.tau_rows) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "  %7s  %.4f  %.4f  %.4f  %.4f\n",
                  format_double(r.value).c_str(), r.summary.mean_T, r.summary.mean_S,
                  r.summary.mean_C, r.summary.acc_s);
    out << buf;
  }
  out << "  margin       T       S       C   acc_s\n";
  for (const auto& r : t.m_rows) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "  %7s  %.4f  %.4f  %.4f  %.4f\n",
                  format_double(r.value).c_str(), r.summary.mean_T, r.summary.mean_S,
                  r.summary.mean_C, r.summary.acc_s);
    out << buf;
  }
  return out.str();
}

std::string to_text(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "component ablation (offline, from traces):\n";
  out << "  configuration       T_s1    T_s2       S       C   acc_s\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "  %-17s %.4f  %.4f  %.4f  %.4f  %.4f\n", r.name.c_str(),
                  r.T_sigma1, r.T_sigma2, r.S, r.C, r.acc_s);
    out << buf;
  }
  return out.str();
}

std::string to_text(const OracleMae& o) {
  std::ostringstream out;
  out << "two-channel temporal oracle: mae_a=" << fmt(o.mae_a) << " s  mae_b=" << fmt(o.mae_b)
      << " s  oracle=" << fmt(o.mae_oracle) << " s\n";
  return out.str();
}

}  // namespace twopass
