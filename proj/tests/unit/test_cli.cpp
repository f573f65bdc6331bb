#include <doctest.h>

#include <unistd.h>

#include <filesystem>

#include <json.hpp>

#include "support/fixture.hpp"
#include "twopass/cli.hpp"
#include "twopass/mock_vlm.hpp"
#include "twopass/pipeline.hpp"
#include "twopass/util.hpp"

using namespace twopass;
using namespace twopass::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("twopass_cli_" + tag + "_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void write_small_scored_pair(const fs::path& dir, std::string& pred_path, std::string& gt_path) {
  pred_path = (dir / "pred.csv").string();
  gt_path = (dir / "gt.csv").string();
  write_file(pred_path,
             "video_id,time,x,y,type\n"
             "a,10,0.5,0.5,single\n"
             "b,12,0.4,0.3,t-bone\n");
  write_file(gt_path,
             "video_id,time,x,y,type\n"
             "a,10,0.5,0.5,single\n"
             "b,11,0.4,0.3,rear-end\n");
}

}  // namespace

TEST_CASE("score exits 0 on valid files") {
  TempDir dir("score");
  std::string pred, gt;
  write_small_scored_pair(dir.path, pred, gt);
  CHECK(dispatch({"score", "--pred", pred, "--gt", gt}) == 0);
}

TEST_CASE("score writes machine-readable JSON") {
  TempDir dir("scorejson");
  std::string pred, gt;
  write_small_scored_pair(dir.path, pred, gt);
  const std::string json_path = (dir.path / "summary.json").string();
  CHECK(dispatch({"score", "--pred", pred, "--gt", gt, "--bootstrap", "200", "--seed", "7",
                  "--json", json_path}) == 0);
  auto summary = json::parse(read_file(json_path));
  CHECK(summary["n"] == 2);
  CHECK(summary["T"].get<double>() > 0.0);
  CHECK(summary.contains("ci"));
}

TEST_CASE("missing required flags exit 1") {
  CHECK(dispatch({"run", "--out", "/tmp/x"}) == 1);       // no --manifest
  CHECK(dispatch({"score", "--pred", "p.csv"}) == 1);     // no --gt
  CHECK(dispatch({"nonsense"}) == 1);
  CHECK(dispatch({}) == 1);
}

TEST_CASE("unreadable inputs exit 1") {
  CHECK(dispatch({"score", "--pred", "/no/such/pred.csv", "--gt", "/no/such/gt.csv"}) != 0);
}

TEST_CASE("sweep over an incomplete trace exits 2 and names the video") {
  TempDir dir("sweepbad");
  // a trace with a prediction whose provenance claims a healthy coarse pass,
  // but with no call records at all
  PassTrace broken;
  broken.video_id = "vbroken";
  broken.duration = 20.0;
  Prediction p;
  p.video_id = "vbroken";
  p.t_star = 1.0;
  p.provenance.pass1_ok = true;
  p.provenance.type_source = TypeSource::Specialist;
  broken.prediction = p;
  const std::string traces = (dir.path / "traces.jsonl").string();
  write_traces_jsonl(traces, {broken});
  const std::string gt = (dir.path / "gt.csv").string();
  write_file(gt, "video_id,time,x,y,type\nvbroken,1,0.5,0.5,single\n");
  CHECK(dispatch({"sweep", "--traces", traces, "--gt", gt}) == 2);
}

TEST_CASE("config layering: defaults, then file, then flags") {
  TempDir dir("layers");
  std::string pred, gt;
  write_small_scored_pair(dir.path, pred, gt);
  const std::string cfg_path = (dir.path / "cfg.json").string();
  write_file(cfg_path, R"({"sigma_t": 2.0, "tau": 0.5})");

  // file only
  std::string out1 = (dir.path / "out1").string();
  CHECK(dispatch({"score", "--pred", pred, "--gt", gt, "--config", cfg_path, "--out", out1}) == 0);
  auto cfg1 = json::parse(read_file(out1 + "/config.json"));
  CHECK(cfg1["sigma_t"] == 2.0);
  CHECK(cfg1["tau"] == 0.5);
  CHECK(cfg1["margin"] == 10.0);  // untouched default

  // flag beats file
  std::string out2 = (dir.path / "out2").string();
  CHECK(dispatch({"score", "--pred", pred, "--gt", gt, "--config", cfg_path, "--sigma-t", "3.0",
                  "--out", out2}) == 0);
  auto cfg2 = json::parse(read_file(out2 + "/config.json"));
  CHECK(cfg2["sigma_t"] == 3.0);
  CHECK(cfg2["tau"] == 0.5);
}

TEST_CASE("unknown config keys are a validation error") {
  TempDir dir("badcfg");
  std::string pred, gt;
  write_small_scored_pair(dir.path, pred, gt);
  const std::string cfg_path = (dir.path / "cfg.json").string();
  write_file(cfg_path, R"({"sigma_tee": 2.0})");
  CHECK(dispatch({"score", "--pred", pred, "--gt", gt, "--config", cfg_path}) == 1);
}

TEST_CASE("run + score + sweep + ablate + diagnose round-trip through the CLI") {
  TempDir dir("cli_e2e");
  auto fx = make_e2e_fixture((dir.path / "fx").string(), 15);
  MockVlmServer server(fx.script);
  server.start_any_port();

  const std::string out = (dir.path / "out").string();
  CHECK(dispatch({"run", "--manifest", fx.manifest_path, "--out", out, "--mock-endpoint",
                  server.endpoint(), "--backoff-base", "0.002"}) == 0);
  CHECK(file_exists(out + "/predictions.csv"));
  CHECK(file_exists(out + "/traces.jsonl"));
  CHECK(file_exists(out + "/config.json"));

  CHECK(dispatch({"score", "--pred", out + "/predictions.csv", "--gt", fx.gt_path,
                  "--bootstrap", "200"}) == 0);
  const std::string tables = (dir.path / "tables").string();
  CHECK(dispatch({"sweep", "--traces", out + "/traces.jsonl", "--gt", fx.gt_path, "--out",
                  tables}) == 0);
  CHECK(file_exists(tables + "/sweep.csv"));
  CHECK(dispatch({"ablate", "--traces", out + "/traces.jsonl", "--gt", fx.gt_path, "--out",
                  tables}) == 0);
  CHECK(file_exists(tables + "/ablation.csv"));
  CHECK(dispatch({"diagnose", "--pred", out + "/predictions.csv", "--gt", fx.gt_path,
                  "--traces", out + "/traces.jsonl", "--out", tables}) == 0);
  CHECK(file_exists(tables + "/confusion.csv"));
  CHECK(file_exists(tables + "/per_type.csv"));
  CHECK(file_exists(tables + "/fallback_decomposition.csv"));
  server.stop();
}

TEST_CASE("run without endpoints is a configuration error") {
  TempDir dir("noendpoint");
  auto fx = make_e2e_fixture((dir.path / "fx").string(), 2);
  ::unsetenv("GROUNDING_ENDPOINT");
  ::unsetenv("TYPING_ENDPOINT");
  CHECK(dispatch({"run", "--manifest", fx.manifest_path, "--out", (dir.path / "o").string()}) ==
        1);
}
