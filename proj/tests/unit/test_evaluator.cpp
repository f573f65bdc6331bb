#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "twopass/evaluator.hpp"
#include "twopass/util.hpp"

using namespace twopass;

namespace {

ScoreRow row(const std::string& id, double hm) { return {id, 0, 0, 0, hm}; }

std::vector<ScoreRow> rows_from(std::initializer_list<double> hms) {
  std::vector<ScoreRow> rows;
  int i = 0;
  for (double hm : hms) rows.push_back(row("v" + std::to_string(i++), hm));
  return rows;
}

}  // namespace

TEST_CASE("temporal score known answers") {
  CHECK(temporal_score(5.0, 5.0, 1.0) == 1.0);
  CHECK(temporal_score(6.0, 5.0, 1.0) == doctest::Approx(0.606531).epsilon(1e-6));
  CHECK(temporal_score(3.0, 5.0, 1.0) == doctest::Approx(0.135335).epsilon(1e-6));
}

TEST_CASE("spatial score known answers") {
  CHECK(spatial_score({0.3, 0.4}, {0.3, 0.4}, 0.127, 0.119) == 1.0);
  CHECK(spatial_score({0.127, 0.0}, {0.0, 0.0}, 0.127, 0.119) ==
        doctest::Approx(0.606531).epsilon(1e-6));
  CHECK(spatial_score({0.127, 0.119}, {0.0, 0.0}, 0.127, 0.119) ==
        doctest::Approx(0.367879).epsilon(1e-6));
}

TEST_CASE("type score is an indicator") {
  CHECK(type_score(CollisionType::TBone, CollisionType::TBone) == 1.0);
  CHECK(type_score(CollisionType::HeadOn, CollisionType::TBone) == 0.0);
  CHECK(type_score(CollisionType::Single, CollisionType::Single) == 1.0);
}

TEST_CASE("harmonic mean known answers and the zero rule") {
  CHECK(harmonic_mean3(1.0, 1.0, 1.0) == 1.0);
  CHECK(harmonic_mean3(0.9, 0.6, 0.0) == 0.0);
  CHECK(harmonic_mean3(0.9, 0.6, 0.3) == doctest::Approx(0.490909).epsilon(1e-6));
}

TEST_CASE("harmonic mean is bounded by the minimum and permutation-invariant") {
  DetRng rng(21);
  for (int i = 0; i < 2000; ++i) {
    double a = rng.next_unit(), b = rng.next_unit(), c = rng.next_unit();
    double hm = harmonic_mean3(a, b, c);
    CHECK(hm <= std::min({a, b, c}) + 1e-12);
    CHECK(hm >= 0.0);
    CHECK(hm == harmonic_mean3(c, a, b));
    CHECK(hm == harmonic_mean3(b, a, c));
  }
}

TEST_CASE("scores are symmetric and decrease with distance") {
  DetRng rng(22);
  for (int i = 0; i < 500; ++i) {
    double t1 = rng.next_unit() * 30.0, t2 = rng.next_unit() * 30.0;
    CHECK(temporal_score(t1, t2, 1.0) == temporal_score(t2, t1, 1.0));
    NormPoint p{rng.next_unit(), rng.next_unit()}, q{rng.next_unit(), rng.next_unit()};
    CHECK(spatial_score(p, q, 0.127, 0.119) == spatial_score(q, p, 0.127, 0.119));
  }
  CHECK(temporal_score(6.0, 5.0, 1.0) > temporal_score(7.0, 5.0, 1.0));
  CHECK(spatial_score({0.1, 0.0}, {0.0, 0.0}, 0.127, 0.119) >
        spatial_score({0.2, 0.0}, {0.0, 0.0}, 0.127, 0.119));
}

TEST_CASE("score_video combines components and rejects id mismatches") {
  PredictionRow pred{"v1", 10.0, 0.5, 0.5, CollisionType::TBone};
  GroundTruth gt{"v1", 10.0, 0.5, 0.5, CollisionType::TBone};
  auto s = score_video(pred, gt, {});
  CHECK(s.T == 1.0);
  CHECK(s.S == 1.0);
  CHECK(s.C == 1.0);
  CHECK(s.hm == 1.0);

  gt.video_id = "v2";
  CHECK_THROWS_AS(score_video(pred, gt, {}), InputError);
}

TEST_CASE("dataset summary: component means and mean-of-harmonic-means") {
  std::vector<ScoreRow> rows = {{"a", 1.0, 1.0, 1.0, 1.0}, {"b", 0.5, 0.5, 0.0, 0.0}};
  auto s = dataset_summary(rows);
  CHECK(s.mean_T == 0.75);
  CHECK(s.mean_S == 0.75);
  CHECK(s.mean_C == 0.5);
  CHECK(s.acc_s == 0.5);
  // the harmonic mean of the means is a different number
  CHECK(harmonic_mean3(s.mean_T, s.mean_S, s.mean_C) ==
        doctest::Approx(0.642857).epsilon(1e-6));

  std::vector<ScoreRow> single = {{"a", 0.497, 0.538, 0.591, 0.52}};
  auto s1 = dataset_summary(single);
  CHECK(s1.mean_T == 0.497);
  CHECK(s1.acc_s == 0.52);

  CHECK_THROWS_AS(dataset_summary({}), InputError);
}

TEST_CASE("dataset summary is permutation-invariant") {
  DetRng rng(23);
  std::vector<ScoreRow> rows;
  for (int i = 0; i < 50; ++i)
    rows.push_back({"v" + std::to_string(i), rng.next_unit(), rng.next_unit(), rng.next_unit(),
                    rng.next_unit()});
  auto s1 = dataset_summary(rows);
  std::reverse(rows.begin(), rows.end());
  auto s2 = dataset_summary(rows);
  CHECK(s1.acc_s == doctest::Approx(s2.acc_s).epsilon(1e-15));
  CHECK(s1.mean_T == doctest::Approx(s2.mean_T).epsilon(1e-15));
}

TEST_CASE("bootstrap on zero-variance rows degenerates to a point") {
  auto rows = rows_from({0.5, 0.5, 0.5, 0.5, 0.5});
  auto [lo, hi] = bootstrap_ci(rows, 500, 0.95, 7);
  CHECK(lo == 0.5);
  CHECK(hi == 0.5);
}

TEST_CASE("bootstrap is deterministic per seed") {
  DetRng rng(24);
  std::vector<ScoreRow> rows;
  for (int i = 0; i < 200; ++i) rows.push_back(row("v" + std::to_string(i), rng.next_unit()));
  auto ci1 = bootstrap_ci(rows, 1000, 0.95, 42);
  auto ci2 = bootstrap_ci(rows, 1000, 0.95, 42);
  CHECK(ci1.first == ci2.first);
  CHECK(ci1.second == ci2.second);
  auto ci3 = bootstrap_ci(rows, 1000, 0.95, 43);
  CHECK((ci3.first != ci1.first || ci3.second != ci1.second));
  CHECK(ci1.first < ci1.second);
}

TEST_CASE("paired bootstrap on identical inputs") {
  auto rows = rows_from({0.2, 0.4, 0.6, 0.8});
  auto r = paired_bootstrap(rows, rows, 1000, 5);
  CHECK(r.delta_mean == 0.0);
  CHECK(r.p_two_sided == 1.0);
}

TEST_CASE("paired bootstrap on a constant shift hits the p floor") {
  DetRng rng(25);
  std::vector<ScoreRow> a, b;
  for (int i = 0; i < 100; ++i) {
    double hm = rng.next_unit() * 0.8;
    a.push_back(row("v" + std::to_string(i), hm + 0.1));
    b.push_back(row("v" + std::to_string(i), hm));
  }
  auto r = paired_bootstrap(a, b, 1000, 9);
  CHECK(r.delta_mean == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(r.p_two_sided == doctest::Approx(0.001));  // 1/n_resamples
}

TEST_CASE("paired bootstrap rejects mismatched id sets") {
  auto a = rows_from({0.5, 0.6});
  std::vector<ScoreRow> b = {row("x0", 0.5), row("x1", 0.6)};
  CHECK_THROWS_AS(paired_bootstrap(a, b, 100, 1), InputError);
}

TEST_CASE("predictions CSV round-trips doubles exactly") {
  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "twopass_pred_roundtrip.csv").string();
  std::vector<PredictionRow> rows = {
      {"v0", 11.4, 0.512, 0.488, CollisionType::Single},
      {"v1", 13.4, -0.001, 0.99999999, CollisionType::TBone},
      {"v2", 0.05, 1.0 / 3.0, 2.0 / 3.0, CollisionType::HeadOn},
  };
  write_predictions_csv(path, rows);
  auto read = read_predictions_csv(path);
  REQUIRE(read.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(read[i].video_id == rows[i].video_id);
    CHECK(read[i].t == rows[i].t);
    CHECK(read[i].x == rows[i].x);
    CHECK(read[i].y == rows[i].y);
    CHECK(read[i].type == rows[i].type);
  }
  fs::remove(path);
}

TEST_CASE("score_rows joins by id and sorts") {
  std::vector<PredictionRow> preds = {{"b", 1.0, 0.5, 0.5, CollisionType::Single},
                                      {"a", 2.0, 0.5, 0.5, CollisionType::TBone}};
  std::vector<GroundTruth> gts = {{"a", 2.0, 0.5, 0.5, CollisionType::TBone},
                                  {"b", 1.0, 0.5, 0.5, CollisionType::Single}};
  auto rows = score_rows(preds, gts, {});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].video_id == "a");
  CHECK(rows[1].video_id == "b");
  CHECK(rows[0].hm == 1.0);

  gts.pop_back();
  CHECK_THROWS_AS(score_rows(preds, gts, {}), InputError);
}
