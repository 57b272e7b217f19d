#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "oracles.hpp"
#include "uie/commands.hpp"
#include "uie/image_io.hpp"

using namespace uie;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("uie_cmd_" + std::to_string(Rng(reinterpret_cast<uint64_t>(this)).next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE_MESSAGE(is, path);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream is(path);
  REQUIRE_MESSAGE(is, path);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(is, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    rows.push_back(std::move(cells));
  }
  return rows;
}

TrainConfig tiny_cfg() {
  TrainConfig cfg;
  cfg.resolution_h = cfg.resolution_w = 16;
  cfg.net.rep_channels = 6;
  cfg.net.style_channels = 8;
  cfg.net.style_downsample = 4;
  cfg.net.n_reb = cfg.net.n_seb = 2;
  cfg.net.proj_dim = 3;
  cfg.net.mlp_hidden = 10;
  cfg.phase1_steps = 5;
  cfg.phase2_steps = 5;
  cfg.seed = 7;
  return cfg;
}

SynthOptions synth_opt(const std::string& out) {
  SynthOptions o;
  o.out_dir = out;
  o.n = 6;
  o.tiers = {0.2, 0.8};
  o.seed = 7;
  o.resolution = 16;
  return o;
}

}  // namespace

TEST_CASE("synth writes the dataset layout, tier table and manifest") {
  TempDir tmp;
  cmd_synth(synth_opt(tmp.sub("d")));

  CHECK(fs::exists(tmp.path / "d" / "manifest.json"));
  auto tiers = read_csv(tmp.sub("d/tiers.csv"));
  REQUIRE(tiers.size() == 7);  // header + 6 rows
  CHECK(tiers[0] == std::vector<std::string>{"name", "tier", "label"});

  int files = 0;
  for (auto& e : fs::directory_iterator(tmp.path / "d" / "input")) (void)e, ++files;
  CHECK(files == 6);

  SUBCASE("rerunning with the same seed rewrites identical files") {
    std::string before = file_bytes(tmp.sub("d/input/img000__mild.png"));
    std::string tiers_before = file_bytes(tmp.sub("d/tiers.csv"));
    SynthOptions again = synth_opt(tmp.sub("d"));
    again.force = true;
    cmd_synth(again);
    CHECK(file_bytes(tmp.sub("d/input/img000__mild.png")) == before);
    CHECK(file_bytes(tmp.sub("d/tiers.csv")) == tiers_before);
  }

  SUBCASE("a non-empty output directory requires force") {
    CHECK_THROWS_AS(cmd_synth(synth_opt(tmp.sub("d"))), ConfigError);
  }
}

TEST_CASE("train and enhance work end to end at toy scale") {
  TempDir tmp;
  cmd_synth(synth_opt(tmp.sub("d")));

  TrainOptions topt;
  topt.data_dir = tmp.sub("d");
  topt.out_dir = tmp.sub("run");
  topt.cfg = tiny_cfg();
  cmd_train(topt);
  CHECK(fs::exists(tmp.path / "run" / "checkpoint.bin"));
  CHECK(fs::exists(tmp.path / "run" / "train_log.csv"));
  CHECK(fs::exists(tmp.path / "run" / "manifest.json"));

  EnhanceOptions eopt;
  eopt.checkpoint = tmp.sub("run/checkpoint.bin");
  eopt.input_dir = tmp.sub("d");
  eopt.out_dir = tmp.sub("enh");
  eopt.dump_states = true;
  cmd_enhance(eopt);

  // one enhanced raster per input, plus K+1 state dumps each
  int outputs = 0, states = 0;
  for (auto& e : fs::directory_iterator(tmp.path / "enh")) {
    std::string name = e.path().filename().string();
    if (name.find("__state") != std::string::npos)
      ++states;
    else if (name.size() > 4 && name.substr(name.size() - 4) == ".png")
      ++outputs;
  }
  CHECK(outputs == 6);
  CHECK(states == 6 * 3);

  auto routing = read_csv(tmp.sub("enh/routing.csv"));
  REQUIRE(routing.size() == 7);
  CHECK(routing[0] == std::vector<std::string>{"name", "w_0", "w_1", "w_2"});
  for (size_t r = 1; r < routing.size(); ++r) {
    double sum = 0;
    for (int k = 1; k <= 3; ++k) sum += std::stod(routing[r][k]);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("evaluate with the checkpoint emits weights and sane metrics") {
    EvaluateOptions vopt;
    vopt.data_dir = tmp.sub("d");
    vopt.out_dir = tmp.sub("eval");
    vopt.checkpoint = tmp.sub("run/checkpoint.bin");
    MetricReport report = cmd_evaluate(vopt);
    REQUIRE(report.rows.size() == 6);
    auto csv = read_csv(tmp.sub("eval/report.csv"));
    REQUIRE(csv.size() == 8);  // header + 6 rows + mean
    CHECK(csv[0][0] == "name");
    CHECK(csv[0][5] == "w_0");
    // the mean row equals the arithmetic average of the rows
    double psnr_sum = 0;
    for (const MetricRow& r : report.rows) psnr_sum += r.psnr;
    CHECK(std::stod(csv[7][1]) == doctest::Approx(psnr_sum / 6).epsilon(1e-9));
  }

  SUBCASE("route-viz emits one row per image with four points each") {
    RouteVizOptions vopt;
    vopt.checkpoint = tmp.sub("run/checkpoint.bin");
    vopt.data_dir = tmp.sub("d");
    vopt.out_dir = tmp.sub("viz");
    cmd_route_viz(vopt);
    auto csv = read_csv(tmp.sub("viz/routing_projection.csv"));
    REQUIRE(csv.size() == 7);
    CHECK(csv[0].size() == 1 + 2 * 4);  // name + (x,y) for states 0..2 and gt
    CHECK(fs::exists(tmp.path / "viz" / "summary.json"));

    // deterministic under a fixed checkpoint
    RouteVizOptions again = vopt;
    again.out_dir = tmp.sub("viz2");
    cmd_route_viz(again);
    CHECK(file_bytes(tmp.sub("viz/routing_projection.csv")) ==
          file_bytes(tmp.sub("viz2/routing_projection.csv")));
  }

  SUBCASE("route-viz requires ground truth") {
    RouteVizOptions vopt;
    vopt.checkpoint = tmp.sub("run/checkpoint.bin");
    vopt.data_dir = tmp.sub("enh");  // no gt/ inside
    vopt.out_dir = tmp.sub("viz3");
    CHECK_THROWS_AS(cmd_route_viz(vopt), DataError);
  }
}

TEST_CASE("evaluate against ground truth itself caps the metrics") {
  TempDir tmp;
  cmd_synth(synth_opt(tmp.sub("d")));
  EvaluateOptions vopt;
  vopt.data_dir = tmp.sub("d");
  vopt.out_dir = tmp.sub("eval");
  vopt.pred_dir = tmp.sub("d/gt");
  vopt.resolution = 16;
  MetricReport report = cmd_evaluate(vopt);
  REQUIRE(report.rows.size() == 6);
  for (const MetricRow& r : report.rows) {
    CHECK(r.psnr == doctest::Approx(100.0));
    CHECK(r.ssim == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("evaluate without checkpoint scores the degraded inputs") {
  TempDir tmp;
  cmd_synth(synth_opt(tmp.sub("d")));
  EvaluateOptions vopt;
  vopt.data_dir = tmp.sub("d");
  vopt.out_dir = tmp.sub("eval");
  vopt.resolution = 16;
  MetricReport report = cmd_evaluate(vopt);
  for (const MetricRow& r : report.rows) {
    CHECK(r.psnr < 100.0);
    CHECK(r.weights.empty());
  }
}

TEST_CASE("ablation harness") {
  TempDir tmp;
  cmd_synth(synth_opt(tmp.sub("d")));

  AblateOptions aopt;
  aopt.data_dir = tmp.sub("d");
  aopt.out_dir = tmp.sub("abl");
  aopt.base = tiny_cfg();
  aopt.base.phase1_steps = 3;
  aopt.base.phase2_steps = 3;
  aopt.arms = {"full", "wo-decouple", "wo-route", "state-0", "state-1", "k1",
               "internal-cascade", "external-cascade"};
  cmd_ablate(aopt);

  auto csv = read_csv(tmp.sub("abl/ablation.csv"));
  REQUIRE(csv.size() == 9);  // header + 8 arms
  CHECK(csv[0][0] == "arm");
  CHECK(csv[1][0] == "full");

  // routed arms report weights that sum to one; unrouted leave blanks
  std::map<std::string, size_t> col;
  for (size_t i = 0; i < csv[0].size(); ++i) col[csv[0][i]] = i;
  REQUIRE(col.count("w_0"));
  for (size_t r = 1; r < csv.size(); ++r) {
    if (csv[r][0] == "full" || csv[r][0] == "wo-decouple" || csv[r][0] == "k1") {
      double sum = 0;
      for (size_t c = col["w_0"]; c < csv[r].size(); ++c)
        if (!csv[r][c].empty()) sum += std::stod(csv[r][c]);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    } else {
      CHECK(csv[r][col["w_0"]].empty());
    }
  }

  SUBCASE("unknown arms are rejected with the valid list") {
    AblateOptions bad = aopt;
    bad.out_dir = tmp.sub("abl2");
    bad.arms = {"nonsense"};
    try {
      cmd_ablate(bad);
      FAIL("expected arm error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("wo-decouple") != std::string::npos);
    }
  }
}

TEST_CASE("training with zero phase-2 steps yields a plain single-pass model") {
  TempDir tmp;
  cmd_synth(synth_opt(tmp.sub("d")));
  TrainOptions topt;
  topt.data_dir = tmp.sub("d");
  topt.out_dir = tmp.sub("run");
  topt.cfg = tiny_cfg();
  topt.cfg.phase2_steps = 0;
  cmd_train(topt);

  Checkpoint ckpt = load_checkpoint(tmp.sub("run/checkpoint.bin"));
  CHECK(ckpt.step == topt.cfg.phase1_steps);
  // router untouched: all states identical at a fresh unit means uniform
  // weights would need trained injections; here just confirm the checkpoint
  // enhances and the router params equal a fresh initialization
  Checkpoint fresh = init_checkpoint(topt.cfg);
  for (auto& [name, p] : ckpt.net->params())
    if (name.rfind("router.", 0) == 0)
      CHECK(p.value.data == fresh.net->params().get(name).value.data);
}

TEST_CASE("commands do not mutate their input directories") {
  TempDir tmp;
  cmd_synth(synth_opt(tmp.sub("d")));
  std::map<std::string, std::string> before;
  for (auto& e : fs::recursive_directory_iterator(tmp.path / "d"))
    if (e.is_regular_file()) before[e.path().string()] = file_bytes(e.path().string());

  TrainOptions topt;
  topt.data_dir = tmp.sub("d");
  topt.out_dir = tmp.sub("run");
  topt.cfg = tiny_cfg();
  topt.cfg.phase1_steps = 2;
  topt.cfg.phase2_steps = 2;
  cmd_train(topt);

  for (auto& [path, bytes] : before) CHECK(file_bytes(path) == bytes);
}
