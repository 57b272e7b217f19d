#include "uie/commands.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "uie/image_io.hpp"
#include "uie/routing.hpp"
#include "uie/synth.hpp"
#include "uie/textutil.hpp"
#include "uie/trajectory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace uie {

namespace {

std::string timestamp_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json config_json(const TrainConfig& c) {
  json j;
  j["resolution_h"] = c.resolution_h;
  j["resolution_w"] = c.resolution_w;
  j["rep_channels"] = c.net.rep_channels;
  j["style_channels"] = c.net.style_channels;
  j["style_downsample"] = c.net.style_downsample;
  j["n_reb"] = c.net.n_reb;
  j["n_seb"] = c.net.n_seb;
  j["proj_dim"] = c.net.proj_dim;
  j["mlp_hidden"] = c.net.mlp_hidden;
  j["phase1_steps"] = c.phase1_steps;
  j["phase2_steps"] = c.phase2_steps;
  j["pseudo_label_start_fraction"] = c.pseudo_label_start_fraction;
  j["learning_rate"] = c.learning_rate;
  j["router_lr_multiplier"] = c.router_lr_multiplier;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["k"] = c.trajectory_depth;
  j["lambda_l1"] = c.loss.l1;
  j["lambda_l2"] = c.loss.l2;
  j["lambda_str"] = c.loss.str;
  j["lambda_grad"] = c.loss.grad;
  j["lambda_perc"] = c.loss.perc;
  j["lambda_style"] = c.loss.style;
  j["lambda_rep_dec"] = c.loss.rep_dec;
  j["lambda_w_recon"] = c.loss.w_recon;
  j["lambda_route"] = c.loss.route;
  j["lambda_k_recon"] = c.loss.k_recon;
  j["extractor"] = c.extractor;
  return j;
}

// every command writes exactly one manifest alongside its outputs
void write_manifest(const std::string& out_dir, const std::string& command, json config,
                    uint64_t seed, const std::vector<std::string>& outputs,
                    const std::string& started) {
  json j;
  j["command"] = command;
  j["config"] = std::move(config);
  j["seed"] = seed;
  j["version"] = kToolVersion;
  j["started_at"] = started;
  j["finished_at"] = timestamp_now();
  j["outputs"] = outputs;
  std::ofstream os(fs::path(out_dir) / "manifest.json");
  if (!os) throw IoError("cannot write manifest in " + out_dir);
  os << j.dump(2) << "\n";
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

std::string weight_header(int count, int from = 0) {
  std::string s;
  for (int k = from; k < count; ++k) s += ",w_" + std::to_string(k);
  return s;
}

}  // namespace

void write_metric_report_csv(const std::string& path, const MetricReport& report) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write report " + path);
  os << "name,psnr,ssim,uiqm,uciqe" << weight_header(report.n_weights) << "\n";
  auto row = [&](const MetricRow& r) {
    os << r.name << "," << fmt_double(r.psnr) << "," << fmt_double(r.ssim) << ","
       << fmt_double(r.uiqm) << "," << fmt_double(r.uciqe);
    for (int k = 0; k < report.n_weights; ++k)
      os << "," << (k < static_cast<int>(r.weights.size()) ? fmt_double(r.weights[k]) : "");
    os << "\n";
  };
  for (const MetricRow& r : report.rows) row(r);
  row(report.means());
}

void write_metric_report_json(const std::string& path, const MetricReport& report) {
  auto row_json = [&](const MetricRow& r) {
    json j;
    j["name"] = r.name;
    j["psnr"] = r.psnr;
    j["ssim"] = r.ssim;
    j["uiqm"] = r.uiqm;
    j["uciqe"] = r.uciqe;
    if (!r.weights.empty()) j["weights"] = r.weights;
    return j;
  };
  json j;
  j["rows"] = json::array();
  for (const MetricRow& r : report.rows) j["rows"].push_back(row_json(r));
  j["mean"] = row_json(report.means());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write report " + path);
  os << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

void cmd_synth(const SynthOptions& opt) {
  const std::string started = timestamp_now();
  if (opt.out_dir.empty()) throw ConfigError("synth: output directory required");
  if (fs::exists(opt.out_dir) && !fs::is_empty(opt.out_dir) && !opt.force)
    throw ConfigError("synth: output directory " + opt.out_dir +
                      " is not empty (use --force to overwrite)");
  ensure_dir(opt.out_dir);
  ensure_dir((fs::path(opt.out_dir) / "input").string());
  ensure_dir((fs::path(opt.out_dir) / "gt").string());

  SyntheticDataset synth =
      make_synthetic_dataset({}, opt.n, opt.tiers, opt.seed, opt.resolution, opt.resolution);

  std::vector<std::string> outputs;
  for (const SamplePair& pair : synth.data.pairs) {
    std::string in_path = (fs::path(opt.out_dir) / "input" / (pair.name + ".png")).string();
    std::string gt_path = (fs::path(opt.out_dir) / "gt" / (pair.name + ".png")).string();
    save_png(in_path, pair.input);
    save_png(gt_path, pair.target);
    outputs.push_back(in_path);
    outputs.push_back(gt_path);
  }

  std::string tiers_path = (fs::path(opt.out_dir) / "tiers.csv").string();
  std::ofstream tiers(tiers_path, std::ios::trunc);
  if (!tiers) throw IoError("cannot write " + tiers_path);
  tiers << "name,tier,label\n";
  for (const SyntheticPairInfo& info : synth.info)
    tiers << info.name << "," << fmt_double(info.tier) << "," << info.label << "\n";
  tiers.close();
  outputs.push_back(tiers_path);

  json cfg;
  cfg["n"] = opt.n;
  cfg["tiers"] = opt.tiers;
  cfg["resolution"] = opt.resolution;
  write_manifest(opt.out_dir, "synth", std::move(cfg), opt.seed, outputs, started);
}

void cmd_train(const TrainOptions& opt) {
  const std::string started = timestamp_now();
  opt.cfg.validate();
  if (opt.data_dir.empty() || opt.out_dir.empty())
    throw ConfigError("train: --data and --out are required");
  ensure_dir(opt.out_dir);
  Dataset ds = load_dataset(opt.data_dir, opt.cfg.resolution_h, opt.cfg.resolution_w);
  ds.split = Split::train;

  std::vector<TrainLogRow> log;
  Checkpoint ckpt = train_phase1(ds, opt.cfg, &log);
  if (opt.cfg.phase2_steps > 0) ckpt = train_phase2(ds, opt.cfg, std::move(ckpt), &log);

  std::string ckpt_path = (fs::path(opt.out_dir) / "checkpoint.bin").string();
  std::string log_path = (fs::path(opt.out_dir) / "train_log.csv").string();
  save_checkpoint(ckpt, ckpt_path);
  write_train_log_csv(log_path, log, opt.cfg.trajectory_depth);
  write_manifest(opt.out_dir, "train", config_json(opt.cfg), opt.cfg.seed,
                 {ckpt_path, log_path}, started);
}

namespace {

// dataset root (with input/) or a flat directory of rasters
std::vector<std::pair<std::string, std::string>> list_input_images(const std::string& dir) {
  fs::path base(dir);
  if (fs::is_directory(base / "input")) base /= "input";
  if (!fs::is_directory(base)) throw DataError("no such input directory: " + dir);
  std::vector<std::pair<std::string, std::string>> out;  // (stem, path)
  for (const auto& entry : fs::directory_iterator(base)) {
    if (!entry.is_regular_file() || !has_raster_extension(entry.path().filename().string()))
      continue;
    out.emplace_back(entry.path().stem().string(), entry.path().string());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no rasters found in " + dir);
  return out;
}

}  // namespace

void cmd_enhance(const EnhanceOptions& opt) {
  const std::string started = timestamp_now();
  Checkpoint ckpt = load_checkpoint(opt.checkpoint);
  ensure_dir(opt.out_dir);
  const int rh = ckpt.config.resolution_h, rw = ckpt.config.resolution_w;
  const int depth = ckpt.config.trajectory_depth;

  std::vector<std::string> outputs;
  std::string routing_path = (fs::path(opt.out_dir) / "routing.csv").string();
  std::ofstream routing(routing_path, std::ios::trunc);
  if (!routing) throw IoError("cannot write " + routing_path);
  routing << "name" << weight_header(depth + 1) << "\n";

  for (const auto& [stem, path] : list_input_images(opt.input_dir)) {
    Image input = clamp01(resize_bilinear(load_image(path), rh, rw));
    auto [enhanced, decision] = enhance(input, ckpt);
    std::string out_path = (fs::path(opt.out_dir) / (stem + ".png")).string();
    save_png(out_path, enhanced);
    outputs.push_back(out_path);
    routing << stem;
    for (double w : decision.weights) routing << "," << fmt_double(w);
    routing << "\n";

    if (opt.dump_states) {
      auto [rep0, style0] = ckpt.net->encode_image(input);
      Trajectory traj = unroll(*ckpt.net, rep0, style0, depth);
      for (const TrajectoryState& st : traj.states) {
        std::string sp = (fs::path(opt.out_dir) /
                          (stem + "__state" + std::to_string(st.k) + ".png")).string();
        save_png(sp, ckpt.net->decode_rep(st.rep));
        outputs.push_back(sp);
      }
    }
  }
  routing.close();
  outputs.push_back(routing_path);

  json cfg = config_json(ckpt.config);
  cfg["dump_states"] = opt.dump_states;
  write_manifest(opt.out_dir, "enhance", std::move(cfg), ckpt.config.seed, outputs, started);
}

MetricReport cmd_evaluate(const EvaluateOptions& opt) {
  const std::string started = timestamp_now();
  if (opt.data_dir.empty()) throw ConfigError("evaluate: --data is required");
  if (!opt.checkpoint.empty() && !opt.pred_dir.empty())
    throw ConfigError("evaluate: --ckpt and --pred are mutually exclusive");
  ensure_dir(opt.out_dir);

  std::optional<Checkpoint> ckpt;
  int rh = opt.resolution, rw = opt.resolution;
  if (!opt.checkpoint.empty()) {
    ckpt = load_checkpoint(opt.checkpoint);
    rh = ckpt->config.resolution_h;
    rw = ckpt->config.resolution_w;
  }
  Dataset ds = load_dataset(opt.data_dir, rh, rw);

  MetricReport report;
  report.n_weights = ckpt ? ckpt->config.trajectory_depth + 1 : 0;
  for (const SamplePair& pair : ds.pairs) {
    Image candidate = pair.input;
    MetricRow row;
    row.name = pair.name;
    if (ckpt) {
      auto [enhanced, decision] = enhance(pair.input, *ckpt);
      candidate = std::move(enhanced);
      row.weights = decision.weights;
    } else if (!opt.pred_dir.empty()) {
      fs::path p = fs::path(opt.pred_dir) / (pair.name + ".png");
      if (!fs::exists(p)) {
        p = fs::path(opt.pred_dir) / (pair.name + ".jpg");
        if (!fs::exists(p))
          throw DataError("evaluate: no prediction for '" + pair.name + "' in " +
                          opt.pred_dir);
      }
      candidate = clamp01(resize_bilinear(load_image(p.string()), rh, rw));
    }
    row.psnr = psnr(candidate, pair.target);
    row.ssim = ssim(candidate, pair.target);
    row.uiqm = uiqm(candidate);
    row.uciqe = uciqe(candidate);
    report.rows.push_back(std::move(row));
  }

  std::string csv_path = (fs::path(opt.out_dir) / "report.csv").string();
  std::string json_path = (fs::path(opt.out_dir) / "report.json").string();
  write_metric_report_csv(csv_path, report);
  write_metric_report_json(json_path, report);

  json cfg = ckpt ? config_json(ckpt->config) : json::object();
  cfg["data"] = opt.data_dir;
  cfg["checkpoint"] = opt.checkpoint;
  cfg["pred"] = opt.pred_dir;
  cfg["resolution_h"] = rh;
  cfg["resolution_w"] = rw;
  write_manifest(opt.out_dir, "evaluate", std::move(cfg),
                 ckpt ? ckpt->config.seed : 0, {csv_path, json_path}, started);
  return report;
}

// ---------------------------------------------------------------------------
// ablation harness

const std::vector<std::string>& valid_ablate_arms(int max_depth) {
  static std::vector<std::string> arms;
  arms = {"full", "wo-decouple", "wo-route", "k1", "k2", "k3", "k4",
          "internal-cascade", "external-cascade"};
  for (int k = 0; k <= max_depth; ++k) arms.push_back("state-" + std::to_string(k));
  return arms;
}

namespace {

struct ArmRow {
  std::string arm;
  MetricRow mean;
  int n_weights = 0;
};

MetricRow evaluate_arm(const Dataset& ds,
                       const std::function<Image(const SamplePair&, std::vector<double>*)>& fn,
                       int n_weights) {
  MetricReport report;
  report.n_weights = n_weights;
  for (const SamplePair& pair : ds.pairs) {
    MetricRow row;
    row.name = pair.name;
    std::vector<double> weights;
    Image out = fn(pair, &weights);
    row.weights = std::move(weights);
    row.psnr = psnr(out, pair.target);
    row.ssim = ssim(out, pair.target);
    row.uiqm = uiqm(out);
    row.uciqe = uciqe(out);
    report.rows.push_back(std::move(row));
  }
  return report.means();
}

}  // namespace

void cmd_ablate(const AblateOptions& opt) {
  const std::string started = timestamp_now();
  opt.base.validate();
  if (opt.data_dir.empty() || opt.out_dir.empty())
    throw ConfigError("ablate: --data and --out are required");
  ensure_dir(opt.out_dir);

  const int base_depth = opt.base.trajectory_depth;
  const auto& valid = valid_ablate_arms(base_depth);
  std::vector<std::string> arms = opt.arms;
  if (arms.empty())
    arms = {"full", "wo-decouple", "wo-route", "state-0", "state-1", "state-2",
            "internal-cascade", "external-cascade"};
  for (const std::string& arm : arms)
    if (std::find(valid.begin(), valid.end(), arm) == valid.end()) {
      std::string all;
      for (const std::string& v : valid) all += (all.empty() ? "" : ", ") + v;
      throw ConfigError("ablate: unknown arm '" + arm + "' (valid: " + all + ")");
    }

  Dataset ds = load_dataset(opt.data_dir, opt.base.resolution_h, opt.base.resolution_w);

  // trained models shared between arms
  std::optional<Checkpoint> full_ckpt, phase1_ckpt, internal_ckpt;
  auto get_full = [&]() -> Checkpoint& {
    if (!full_ckpt) {
      Checkpoint c = train_phase1(ds, opt.base);
      full_ckpt = train_phase2(ds, opt.base, std::move(c));
    }
    return *full_ckpt;
  };
  auto get_phase1 = [&]() -> Checkpoint& {
    if (!phase1_ckpt) phase1_ckpt = train_phase1(ds, opt.base);
    return *phase1_ckpt;
  };
  auto get_internal = [&]() -> Checkpoint& {
    if (!internal_ckpt) internal_ckpt = train_phase1(ds, opt.base, nullptr, 2);
    return *internal_ckpt;
  };

  std::vector<ArmRow> rows;
  for (const std::string& arm : arms) {
    ArmRow row;
    row.arm = arm;
    if (arm == "full" || arm == "wo-decouple" || arm[0] == 'k') {
      TrainConfig cfg = opt.base;
      Checkpoint* ckpt = nullptr;
      Checkpoint local;
      if (arm == "full") {
        ckpt = &get_full();
      } else {
        if (arm == "wo-decouple") cfg.loss.style = 0.0;
        if (arm[0] == 'k') cfg.trajectory_depth = arm[1] - '0';
        Checkpoint c = train_phase1(ds, cfg);
        local = train_phase2(ds, cfg, std::move(c));
        ckpt = &local;
      }
      row.n_weights = ckpt->config.trajectory_depth + 1;
      row.mean = evaluate_arm(ds, [&](const SamplePair& p, std::vector<double>* w) {
        auto [img, decision] = enhance(p.input, *ckpt);
        *w = decision.weights;
        return img;
      }, row.n_weights);
    } else if (arm == "wo-route") {
      Checkpoint& ckpt = get_phase1();
      row.mean = evaluate_arm(ds, [&](const SamplePair& p, std::vector<double>*) {
        return ckpt.net->enhance_once(p.input);
      }, 0);
    } else if (arm == "internal-cascade") {
      Checkpoint& ckpt = get_internal();
      row.mean = evaluate_arm(ds, [&](const SamplePair& p, std::vector<double>*) {
        auto [rep, style] = ckpt.net->encode_image(p.input);
        auto [rep1, style1] = ckpt.net->refine(rep, style);
        auto [rep2, style2] = ckpt.net->refine(rep1, style1);
        return ckpt.net->decode_rep(rep2);
      }, 0);
    } else if (arm == "external-cascade") {
      Checkpoint& ckpt = get_phase1();
      row.mean = evaluate_arm(ds, [&](const SamplePair& p, std::vector<double>*) {
        return ckpt.net->enhance_once(ckpt.net->enhance_once(p.input));
      }, 0);
    } else {  // state-<k>
      int k = std::stoi(arm.substr(6));
      Checkpoint& ckpt = get_full();
      if (k > ckpt.config.trajectory_depth)
        throw ConfigError("ablate: state index exceeds trajectory depth");
      row.mean = evaluate_arm(ds, [&](const SamplePair& p, std::vector<double>*) {
        auto [rep0, style0] = ckpt.net->encode_image(p.input);
        Trajectory traj = unroll(*ckpt.net, rep0, style0, ckpt.config.trajectory_depth);
        return ckpt.net->decode_rep(traj.states[static_cast<size_t>(k)].rep);
      }, 0);
    }
    rows.push_back(std::move(row));
  }

  int max_weights = 0;
  for (const ArmRow& r : rows) max_weights = std::max(max_weights, r.n_weights);

  std::string csv_path = (fs::path(opt.out_dir) / "ablation.csv").string();
  std::ofstream os(csv_path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + csv_path);
  os << "arm,psnr,ssim,uiqm,uciqe" << weight_header(max_weights) << "\n";
  for (const ArmRow& r : rows) {
    os << r.arm << "," << fmt_double(r.mean.psnr) << "," << fmt_double(r.mean.ssim) << ","
       << fmt_double(r.mean.uiqm) << "," << fmt_double(r.mean.uciqe);
    for (int k = 0; k < max_weights; ++k)
      os << ","
         << (k < static_cast<int>(r.mean.weights.size()) ? fmt_double(r.mean.weights[k]) : "");
    os << "\n";
  }
  os.close();

  json cfg = config_json(opt.base);
  cfg["arms"] = arms;
  write_manifest(opt.out_dir, "ablate", std::move(cfg), opt.base.seed, {csv_path}, started);
}

void cmd_route_viz(const RouteVizOptions& opt) {
  const std::string started = timestamp_now();
  Checkpoint ckpt = load_checkpoint(opt.checkpoint);
  ensure_dir(opt.out_dir);
  fs::path gt_dir = fs::path(opt.data_dir) / "gt";
  if (!fs::is_directory(gt_dir))
    throw DataError("route-viz: ground truth directory required at " + gt_dir.string());
  Dataset ds = load_dataset(opt.data_dir, ckpt.config.resolution_h, ckpt.config.resolution_w);
  const int depth = ckpt.config.trajectory_depth;
  const Network& net = *ckpt.net;

  std::string csv_path = (fs::path(opt.out_dir) / "routing_projection.csv").string();
  std::ofstream os(csv_path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + csv_path);
  os << "name";
  for (int k = 0; k <= depth; ++k) os << ",x_" << k << ",y_" << k;
  os << ",x_gt,y_gt\n";

  int severe_total = 0, severe_monotone = 0, all_monotone = 0;
  for (const SamplePair& pair : ds.pairs) {
    auto [rep0, style0] = net.encode_image(pair.input);
    Trajectory traj = unroll(net, rep0, style0, depth);
    std::vector<Tensor> vectors;
    for (const TrajectoryState& st : traj.states)
      vectors.push_back(net.router_hidden(st.style));
    auto [rep_gt, style_gt] = net.encode_image(pair.target);
    vectors.push_back(net.router_hidden(style_gt));

    auto points = project_routing_vectors(vectors);
    os << pair.name;
    for (const auto& p : points) os << "," << fmt_double(p[0]) << "," << fmt_double(p[1]);
    os << "\n";

    const auto& gt_pt = points.back();
    bool monotone = true;
    double prev = 0;
    for (int k = 0; k <= depth; ++k) {
      double dx = points[static_cast<size_t>(k)][0] - gt_pt[0];
      double dy = points[static_cast<size_t>(k)][1] - gt_pt[1];
      double d = std::sqrt(dx * dx + dy * dy);
      if (k > 0 && d > prev) monotone = false;
      prev = d;
    }
    if (monotone) ++all_monotone;
    if (pair.name.find("__severe") != std::string::npos) {
      ++severe_total;
      if (monotone) ++severe_monotone;
    }
  }
  os.close();

  json summary;
  summary["images"] = ds.pairs.size();
  summary["monotone_fraction_all"] =
      ds.pairs.empty() ? 0.0 : static_cast<double>(all_monotone) / ds.pairs.size();
  summary["severe_images"] = severe_total;
  summary["monotone_fraction_severe"] =
      severe_total ? static_cast<double>(severe_monotone) / severe_total : 0.0;
  std::string sum_path = (fs::path(opt.out_dir) / "summary.json").string();
  std::ofstream sum(sum_path, std::ios::trunc);
  sum << summary.dump(2) << "\n";
  sum.close();

  write_manifest(opt.out_dir, "route-viz", config_json(ckpt.config), ckpt.config.seed,
                 {csv_path, sum_path}, started);
}

}  // namespace uie
