#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "twopass/evaluator.hpp"
#include "twopass/gates.hpp"
#include "twopass/gateway.hpp"
#include "twopass/parser.hpp"
#include "twopass/pipeline.hpp"
#include "twopass/sampler.hpp"

namespace py = pybind11;
using namespace twopass;

namespace {

CollisionType type_from_string(const std::string& s) {
  auto t = normalize_type(s);
  if (!t.ok()) throw py::value_error(t.error);
  return *t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "two-pass VLM grounding: plans, parsers, gates and the benchmark metric";

  py::enum_<CollisionType>(m, "CollisionType")
      .value("HEAD_ON", CollisionType::HeadOn)
      .value("REAR_END", CollisionType::RearEnd)
      .value("T_BONE", CollisionType::TBone)
      .value("SIDESWIPE", CollisionType::Sideswipe)
      .value("SINGLE", CollisionType::Single);

  py::enum_<Source>(m, "Source")
      .value("PASS1", Source::Pass1)
      .value("PASS2", Source::Pass2);

  py::class_<VideoRecord>(m, "VideoRecord")
      .def(py::init([](std::string id, std::string path, double duration, int width, int height) {
             return VideoRecord{std::move(id), std::move(path), duration, width, height};
           }),
           py::arg("id"), py::arg("path") = "", py::arg("duration") = 0.0, py::arg("width") = 0,
           py::arg("height") = 0)
      .def_readwrite("id", &VideoRecord::id)
      .def_readwrite("path", &VideoRecord::path)
      .def_readwrite("duration", &VideoRecord::duration)
      .def_readwrite("width", &VideoRecord::width)
      .def_readwrite("height", &VideoRecord::height);

  py::class_<SamplingPlan>(m, "SamplingPlan")
      .def_readonly("timestamps", &SamplingPlan::timestamps)
      .def_readonly("long_edge_px", &SamplingPlan::long_edge_px)
      .def_property_readonly("window",
                             [](const SamplingPlan& p) {
                               return py::make_tuple(p.window_min, p.window_max);
                             })
      .def_property_readonly("crop", [](const SamplingPlan& p) -> py::object {
        if (!p.crop) return py::none();
        return py::make_tuple(p.crop->x0, p.crop->y0, p.crop->x1, p.crop->y1);
      });

  m.def(
      "build_pass1_plan",
      [](const VideoRecord& v) { return build_pass1_plan(v, RunConfig{}); },
      py::arg("video"));
  m.def(
      "build_pass2_plan",
      [](const VideoRecord& v, double t1, double window_delta) {
        RunConfig cfg;
        cfg.window_delta = window_delta;
        return build_pass2_plan(v, t1, cfg);
      },
      py::arg("video"), py::arg("t1"), py::arg("window_delta") = 3.0);
  m.def(
      "build_type_clip_plan",
      [](const VideoRecord& v, double t_star, std::pair<double, double> center,
         double crop_factor) {
        RunConfig cfg;
        cfg.crop_factor = crop_factor;
        return build_type_clip_plan(v, t_star, {center.first, center.second}, cfg);
      },
      py::arg("video"), py::arg("t_star"), py::arg("center"), py::arg("crop_factor") = 2.5);

  m.def("extract_json_block", [](const std::string& text) -> py::object {
    auto r = extract_json_block(text);
    if (!r.ok()) throw py::value_error(r.error);
    return py::str(*r);
  });
  m.def(
      "parse_pass1",
      [](const std::string& text, double duration) {
        auto r = parse_pass1(text, duration);
        if (!r.ok()) throw py::value_error(r.error);
        return py::make_tuple(r->t1, r->raw_x1, r->raw_y1, r->c1);
      },
      py::arg("text"), py::arg("duration"));
  m.def("parse_pass2", [](const std::string& text) {
    auto r = parse_pass2(text);
    if (!r.ok()) throw py::value_error(r.error);
    return py::make_tuple(r->t2, r->raw_x2, r->raw_y2);
  });
  m.def("normalize_type", [](const std::string& text) {
    auto r = normalize_type(text);
    if (!r.ok()) throw py::value_error(r.error);
    return *r;
  });
  m.def("type_name", [](CollisionType t) { return std::string(to_string(t)); });

  m.def(
      "gate1_temporal",
      [](double t1, double t2, std::pair<double, double> window, double tau) {
        auto d = gate1_temporal(t1, Pass2Result{t2, 0.0, 0.0}, window.first, window.second, tau);
        return py::make_tuple(d.t_star, d.source);
      },
      py::arg("t1"), py::arg("t2"), py::arg("window"), py::arg("tau") = 0.3);
  m.def(
      "gate2_spatial",
      [](std::pair<double, double> raw1, std::pair<double, double> raw2, double margin) {
        auto d = gate2_spatial(raw1.first, raw1.second, raw2.first, raw2.second, margin);
        return py::make_tuple(py::make_tuple(d.point.x, d.point.y), d.source);
      },
      py::arg("raw1"), py::arg("raw2"), py::arg("margin") = 10.0);

  m.def("temporal_score", &temporal_score, py::arg("t_pred"), py::arg("t_gt"),
        py::arg("sigma_t") = 1.0);
  m.def(
      "spatial_score",
      [](std::pair<double, double> pred, std::pair<double, double> gt, double sx, double sy) {
        return spatial_score({pred.first, pred.second}, {gt.first, gt.second}, sx, sy);
      },
      py::arg("pred"), py::arg("gt"), py::arg("sigma_x") = 0.127, py::arg("sigma_y") = 0.119);
  m.def(
      "type_score",
      [](const std::string& pred, const std::string& gt) {
        return type_score(type_from_string(pred), type_from_string(gt));
      },
      py::arg("pred"), py::arg("gt"));
  m.def("harmonic_mean3", &harmonic_mean3, py::arg("a"), py::arg("b"), py::arg("c"));

  m.def(
      "score_pair",
      [](std::tuple<double, double, double, std::string> pred,
         std::tuple<double, double, double, std::string> gt, double sigma_t, double sigma_x,
         double sigma_y) {
        PredictionRow p{"v", std::get<0>(pred), std::get<1>(pred), std::get<2>(pred),
                        type_from_string(std::get<3>(pred))};
        GroundTruth g{"v", std::get<0>(gt), std::get<1>(gt), std::get<2>(gt),
                      type_from_string(std::get<3>(gt))};
        auto row = score_video(p, g, {sigma_t, sigma_x, sigma_y});
        return py::make_tuple(row.T, row.S, row.C, row.hm);
      },
      py::arg("pred"), py::arg("gt"), py::arg("sigma_t") = 1.0, py::arg("sigma_x") = 0.127,
      py::arg("sigma_y") = 0.119,
      "Score one (time, x, y, type) prediction against ground truth.");

  m.def(
      "bootstrap_ci",
      [](const std::vector<double>& hms, int n_resamples, double level, std::uint64_t seed) {
        std::vector<ScoreRow> rows;
        rows.reserve(hms.size());
        for (std::size_t i = 0; i < hms.size(); ++i)
          rows.push_back({std::to_string(i), 0, 0, 0, hms[i]});
        auto [lo, hi] = bootstrap_ci(rows, n_resamples, level, seed);
        return py::make_tuple(lo, hi);
      },
      py::arg("hms"), py::arg("n_resamples") = 1000, py::arg("level") = 0.95, py::arg("seed") = 0,
      "Percentile CI of the mean of per-video harmonic means.");

  m.def(
      "paired_bootstrap",
      [](const std::vector<double>& hms_a, const std::vector<double>& hms_b, int n_resamples,
         std::uint64_t seed) {
        if (hms_a.size() != hms_b.size())
          throw py::value_error("paired series must have equal length");
        std::vector<ScoreRow> a, b;
        for (std::size_t i = 0; i < hms_a.size(); ++i) {
          a.push_back({std::to_string(i), 0, 0, 0, hms_a[i]});
          b.push_back({std::to_string(i), 0, 0, 0, hms_b[i]});
        }
        auto r = paired_bootstrap(a, b, n_resamples, seed);
        return py::make_tuple(r.delta_mean, r.p_two_sided);
      },
      py::arg("hms_a"), py::arg("hms_b"), py::arg("n_resamples") = 1000, py::arg("seed") = 0);

  m.def(
      "naive_fill",
      [](const VideoRecord& v) {
        auto p = naive_fill(v);
        return py::make_tuple(p.t_star, p.x_star, p.y_star, p.c_star);
      },
      py::arg("video"));

  m.def(
      "render_prompt",
      [](const std::string& kind, double duration, std::optional<std::pair<double, double>> window) {
        VideoRecord v;
        v.duration = duration;
        return render_prompt(prompt_template(prompt_kind_from_string(kind)), v, window);
      },
      py::arg("kind"), py::arg("duration") = 0.0, py::arg("window") = std::nullopt);
}
