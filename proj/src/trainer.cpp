#include "uie/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "uie/ops.hpp"
#include "uie/serialize.hpp"
#include "uie/textutil.hpp"
#include "uie/trajectory.hpp"

namespace uie {

void TrainConfig::validate() const {
  net.validate();
  loss.validate();
  if (resolution_h < net.style_downsample || resolution_w < net.style_downsample ||
      resolution_h % net.style_downsample || resolution_w % net.style_downsample)
    throw ConfigError("train: resolution must be a positive multiple of the style downsample");
  if (phase1_steps < 1) throw ConfigError("train: phase1_steps must be >= 1");
  if (phase2_steps < 0) throw ConfigError("train: phase2_steps must be >= 0");
  if (pseudo_label_start_fraction < 0.0 || pseudo_label_start_fraction > 1.0)
    throw ConfigError("train: pseudo_label_start_fraction must be in [0,1]");
  if (learning_rate < 0.0 || !std::isfinite(learning_rate))
    throw ConfigError("train: learning rate must be finite and non-negative");
  if (router_lr_multiplier < 0.0 || !std::isfinite(router_lr_multiplier))
    throw ConfigError("train: router lr multiplier must be finite and non-negative");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (trajectory_depth < 1) throw ConfigError("train: trajectory depth K must be >= 1");
}

Checkpoint init_checkpoint(const TrainConfig& cfg) {
  cfg.validate();
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.net = std::make_shared<Network>(cfg.net, cfg.seed);
  ckpt.rng_state = cfg.seed;
  return ckpt;
}

namespace {

struct TrainError : Error {
  explicit TrainError(const std::string& m) : Error("train", m) {}
};

void check_component(double v, const char* name, int phase, long step) {
  if (!std::isfinite(v))
    throw TrainError("phase " + std::to_string(phase) + " step " + std::to_string(step) +
                     ": non-finite " + std::string(name) + " loss component");
}

// deterministic epoch-reshuffled sample order
class SampleOrder {
 public:
  SampleOrder(size_t n, uint64_t seed) : n_(n), rng_(seed) { reshuffle(); }

  size_t next() {
    if (pos_ == idx_.size()) reshuffle();
    return idx_[pos_++];
  }

 private:
  void reshuffle() {
    if (idx_.empty()) {
      idx_.resize(n_);
      std::iota(idx_.begin(), idx_.end(), 0);
    }
    for (size_t i = n_ - 1; i > 0; --i)
      std::swap(idx_[i], idx_[rng_.below(i + 1)]);
    pos_ = 0;
  }

  size_t n_, pos_ = 0;
  std::vector<size_t> idx_;
  Rng rng_;
};

void apply_updates(Network& net, Tape& tape, Adam& adam, long step,
                   double router_lr_scale) {
  for (auto& [name, param] : net.params()) {
    const Tensor* g = tape.param_grad(param);
    if (g)
      adam.update(param, *g, step,
                  name.rfind("router.", 0) == 0 ? router_lr_scale : 1.0);
  }
}

}  // namespace

Phase1Terms phase1_objective(Tape& t, const Network& net, const SamplePair& pair,
                             const LossWeights& w, const FeatureExtractor& ex,
                             int refine_depth) {
  Value i0 = t.constant(tensor_from_image(pair.input));
  Value igt = t.constant(tensor_from_image(pair.target));
  auto [c0, s0] = net.encode(t, i0);
  auto [cgt, sgt] = net.encode(t, igt);
  Phase1Terms terms;
  terms.recon_in = losses::recon(t, i0, net.decode(t, c0), w, ex);
  terms.recon_gt = losses::recon(t, igt, net.decode(t, cgt), w, ex);
  Value c1 = c0, s1 = s0;
  for (int d = 0; d < refine_depth; ++d) std::tie(c1, s1) = net.refine_step(t, c1, s1);
  terms.recon_traj = losses::recon(t, igt, net.decode(t, c1), w, ex);
  terms.style = losses::style(t, s1, sgt);
  terms.total = ops::add(t, ops::add(t, terms.recon_in, terms.recon_gt),
                         ops::add(t, terms.recon_traj, ops::scale(t, terms.style, w.style)));
  return terms;
}

Phase2Terms phase2_objective(Tape& t, const Network& net, const SamplePair& pair,
                             const LossWeights& w, const FeatureExtractor& ex, int depth,
                             bool label_active, int forced_label,
                             const Tensor* frozen_fusion_weights) {
  Value i0 = t.constant(tensor_from_image(pair.input));
  Value igt = t.constant(tensor_from_image(pair.target));
  auto [c0, s0] = net.encode(t, i0);
  auto [cgt, sgt] = net.encode(t, igt);
  auto states = unroll(t, net, c0, s0, depth);

  Phase2Terms terms;
  terms.rep_dec =
      losses::rep_dec(t, i0, igt, net.decode(t, c0), net.decode(t, cgt),
                      net.decode(t, states[1].first), states[1].second, sgt, w, ex);

  std::vector<Value> logit_list, cands;
  for (auto& [rep, style] : states) {
    logit_list.push_back(net.router_logit(t, style).first);
    cands.push_back(rep);
  }
  Value logits = ops::stack_scalars(t, logit_list);
  // fusion weights are detached: the router trains only through the
  // pseudo-label cross-entropy
  Value weights = frozen_fusion_weights
                      ? t.constant(*frozen_fusion_weights)
                      : ops::detach(t, ops::softmax(t, logits));
  terms.fusion_weights = weights;
  Value fused = ops::fuse(t, cands, weights);
  terms.w_recon = losses::recon(t, igt, net.decode(t, fused), w, ex);

  if (label_active) {
    if (forced_label >= 0) {
      terms.kbar = forced_label;
    } else {
      auto cascade = cascade_images(net, pair.input, depth);
      terms.kbar = pseudo_label(cascade, pair.target).kbar;
    }
    terms.route = losses::route(t, logits, terms.kbar);
    terms.k_recon =
        terms.kbar == 0
            ? t.constant(Tensor::scalar(0.0))
            : losses::recon(t, igt, net.decode(t, states[terms.kbar].first), w, ex);
  } else {
    terms.route = t.constant(Tensor::scalar(0.0));
    terms.k_recon = t.constant(Tensor::scalar(0.0));
  }
  terms.total = losses::ada_mod(t, terms.rep_dec, terms.w_recon, terms.route, terms.k_recon, w);
  return terms;
}

Checkpoint train_phase1(const Dataset& dataset, const TrainConfig& cfg,
                        std::vector<TrainLogRow>* log, int refine_depth) {
  if (dataset.empty()) throw DataError("train: empty dataset");
  if (refine_depth < 1) throw ConfigError("train: refine depth must be >= 1");
  Checkpoint ckpt = init_checkpoint(cfg);
  Network& net = *ckpt.net;
  auto extractor = make_extractor(cfg.extractor);
  Adam adam({cfg.learning_rate});
  SampleOrder order(dataset.size(), Rng::mix(cfg.seed, 0xF1));

  const double inv_b = 1.0 / cfg.batch_size;
  for (int s = 0; s < cfg.phase1_steps; ++s) {
    Tape tape(true);
    Value total{};
    TrainLogRow row;
    row.step = ckpt.step + 1;
    row.phase = 1;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const SamplePair& pair = dataset.pairs[order.next()];
      Phase1Terms terms;
      try {
        terms = phase1_objective(tape, net, pair, cfg.loss, *extractor, refine_depth);
      } catch (const std::invalid_argument& e) {
        throw TrainError("phase 1 step " + std::to_string(ckpt.step + 1) +
                         ": non-finite values while building the objective (" + e.what() +
                         ")");
      }
      row.recon_in += tape.val(terms.recon_in)[0] * inv_b;
      row.recon_gt += tape.val(terms.recon_gt)[0] * inv_b;
      row.recon_traj += tape.val(terms.recon_traj)[0] * inv_b;
      row.style += tape.val(terms.style)[0] * inv_b;

      Value member = ops::scale(tape, terms.total, inv_b);
      total = total.valid() ? ops::add(tape, total, member) : member;
    }
    row.rep_dec = row.recon_in + row.recon_gt + row.recon_traj + cfg.loss.style * row.style;
    row.total = tape.val(total)[0];
    check_component(row.recon_in, "recon(input)", 1, row.step);
    check_component(row.recon_gt, "recon(gt)", 1, row.step);
    check_component(row.recon_traj, "recon(trajectory)", 1, row.step);
    check_component(row.style, "style", 1, row.step);

    tape.backward(total);
    ++ckpt.step;
    apply_updates(net, tape, adam, ckpt.step, cfg.router_lr_multiplier);
    if (log) log->push_back(std::move(row));
  }
  return ckpt;
}

Checkpoint train_phase2(const Dataset& dataset, const TrainConfig& cfg, Checkpoint warm,
                        std::vector<TrainLogRow>* log) {
  if (dataset.empty()) throw DataError("train: empty dataset");
  cfg.validate();
  if (!warm.net) throw TrainError("phase 2 requires a phase-1 checkpoint");
  Network& net = *warm.net;
  auto extractor = make_extractor(cfg.extractor);
  Adam adam({cfg.learning_rate});
  SampleOrder order(dataset.size(), Rng::mix(cfg.seed, 0xF2));
  const int depth = cfg.trajectory_depth;

  const double inv_b = 1.0 / cfg.batch_size;
  for (int s = 0; s < cfg.phase2_steps; ++s) {
    // pseudo-label supervision switches on in the late phase
    const bool label_active =
        (static_cast<double>(s + 1) / cfg.phase2_steps) > cfg.pseudo_label_start_fraction;
    Tape tape(true);
    Value total{};
    TrainLogRow row;
    row.step = warm.step + 1;
    row.phase = 2;
    row.kbar_counts.assign(static_cast<size_t>(depth) + 1, 0);
    for (int b = 0; b < cfg.batch_size; ++b) {
      const SamplePair& pair = dataset.pairs[order.next()];
      Phase2Terms terms;
      try {
        terms = phase2_objective(tape, net, pair, cfg.loss, *extractor, depth, label_active);
      } catch (const std::invalid_argument& e) {
        throw TrainError("phase 2 step " + std::to_string(warm.step + 1) +
                         ": non-finite values while building the objective (" + e.what() +
                         ")");
      }
      if (terms.kbar >= 0) ++row.kbar_counts[static_cast<size_t>(terms.kbar)];
      row.rep_dec += tape.val(terms.rep_dec)[0] * inv_b;
      row.w_recon += tape.val(terms.w_recon)[0] * inv_b;
      row.route += tape.val(terms.route)[0] * inv_b;
      row.k_recon += tape.val(terms.k_recon)[0] * inv_b;

      Value member = ops::scale(tape, terms.total, inv_b);
      total = total.valid() ? ops::add(tape, total, member) : member;
    }
    row.total = tape.val(total)[0];
    check_component(row.rep_dec, "rep-dec", 2, row.step);
    check_component(row.w_recon, "w-recon", 2, row.step);
    check_component(row.route, "route", 2, row.step);
    check_component(row.k_recon, "k-recon", 2, row.step);

    tape.backward(total);
    ++warm.step;
    apply_updates(net, tape, adam, warm.step, cfg.router_lr_multiplier);
    if (log) log->push_back(std::move(row));
  }
  return warm;
}

std::pair<Image, RoutingDecision> enhance(const Image& image, const Checkpoint& ckpt) {
  if (!ckpt.net) throw CheckpointError("enhance: checkpoint has no network");
  const Network& net = *ckpt.net;
  net.check_resolution(image.height, image.width);
  auto [rep0, style0] = net.encode_image(image);
  Trajectory traj = unroll(net, rep0, style0, ckpt.config.trajectory_depth);
  auto [decision, out] = route_and_decode(net, traj);
  return {std::move(out), std::move(decision)};
}

// ---------------------------------------------------------------------------
// checkpoint serialization

namespace {

constexpr char kMagic[4] = {'U', 'I', 'E', 'K'};

std::string config_header(const TrainConfig& c) {
  std::ostringstream os;
  os << "format = enhancement-checkpoint\n";
  os << "arch = " << c.net.describe() << "\n";
  os << "resolution_h = " << c.resolution_h << "\n";
  os << "resolution_w = " << c.resolution_w << "\n";
  os << "rep_channels = " << c.net.rep_channels << "\n";
  os << "style_channels = " << c.net.style_channels << "\n";
  os << "style_downsample = " << c.net.style_downsample << "\n";
  os << "n_reb = " << c.net.n_reb << "\n";
  os << "n_seb = " << c.net.n_seb << "\n";
  os << "proj_dim = " << c.net.proj_dim << "\n";
  os << "mlp_hidden = " << c.net.mlp_hidden << "\n";
  os << "phase1_steps = " << c.phase1_steps << "\n";
  os << "phase2_steps = " << c.phase2_steps << "\n";
  os << "pseudo_label_start_fraction = " << fmt_double(c.pseudo_label_start_fraction) << "\n";
  os << "learning_rate = " << fmt_double(c.learning_rate) << "\n";
  os << "router_lr_multiplier = " << fmt_double(c.router_lr_multiplier) << "\n";
  os << "batch_size = " << c.batch_size << "\n";
  os << "seed = " << c.seed << "\n";
  os << "trajectory_depth = " << c.trajectory_depth << "\n";
  os << "lambda_l1 = " << fmt_double(c.loss.l1) << "\n";
  os << "lambda_l2 = " << fmt_double(c.loss.l2) << "\n";
  os << "lambda_str = " << fmt_double(c.loss.str) << "\n";
  os << "lambda_grad = " << fmt_double(c.loss.grad) << "\n";
  os << "lambda_perc = " << fmt_double(c.loss.perc) << "\n";
  os << "lambda_style = " << fmt_double(c.loss.style) << "\n";
  os << "lambda_rep_dec = " << fmt_double(c.loss.rep_dec) << "\n";
  os << "lambda_w_recon = " << fmt_double(c.loss.w_recon) << "\n";
  os << "lambda_route = " << fmt_double(c.loss.route) << "\n";
  os << "lambda_k_recon = " << fmt_double(c.loss.k_recon) << "\n";
  os << "extractor = " << c.extractor << "\n";
  return os.str();
}

TrainConfig config_from_header(const std::string& header) {
  auto kv = parse_kv_lines(header);
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw CheckpointError("checkpoint header missing '" + key + "'");
    return it->second;
  };
  TrainConfig c;
  c.resolution_h = static_cast<int>(parse_double(need("resolution_h")));
  c.resolution_w = static_cast<int>(parse_double(need("resolution_w")));
  c.net.rep_channels = static_cast<int>(parse_double(need("rep_channels")));
  c.net.style_channels = static_cast<int>(parse_double(need("style_channels")));
  c.net.style_downsample = static_cast<int>(parse_double(need("style_downsample")));
  c.net.n_reb = static_cast<int>(parse_double(need("n_reb")));
  c.net.n_seb = static_cast<int>(parse_double(need("n_seb")));
  c.net.proj_dim = static_cast<int>(parse_double(need("proj_dim")));
  c.net.mlp_hidden = static_cast<int>(parse_double(need("mlp_hidden")));
  c.phase1_steps = static_cast<int>(parse_double(need("phase1_steps")));
  c.phase2_steps = static_cast<int>(parse_double(need("phase2_steps")));
  c.pseudo_label_start_fraction = parse_double(need("pseudo_label_start_fraction"));
  c.learning_rate = parse_double(need("learning_rate"));
  c.router_lr_multiplier = parse_double(need("router_lr_multiplier"));
  c.batch_size = static_cast<int>(parse_double(need("batch_size")));
  c.seed = static_cast<uint64_t>(parse_double(need("seed")));
  c.trajectory_depth = static_cast<int>(parse_double(need("trajectory_depth")));
  c.loss.l1 = parse_double(need("lambda_l1"));
  c.loss.l2 = parse_double(need("lambda_l2"));
  c.loss.str = parse_double(need("lambda_str"));
  c.loss.grad = parse_double(need("lambda_grad"));
  c.loss.perc = parse_double(need("lambda_perc"));
  c.loss.style = parse_double(need("lambda_style"));
  c.loss.rep_dec = parse_double(need("lambda_rep_dec"));
  c.loss.w_recon = parse_double(need("lambda_w_recon"));
  c.loss.route = parse_double(need("lambda_route"));
  c.loss.k_recon = parse_double(need("lambda_k_recon"));
  c.extractor = need("extractor");
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  if (!ckpt.net) throw CheckpointError("save: checkpoint has no network");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path);
  os.write(kMagic, 4);
  write_u32(os, Checkpoint::kFormatVersion);
  write_string(os, config_header(ckpt.config));
  write_u64(os, static_cast<uint64_t>(ckpt.step));
  write_u64(os, ckpt.rng_state);
  write_param_blocks(os, ckpt.net->params());
  if (!os) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("not a checkpoint file: " + path);
  uint32_t version = read_u32(is);
  if (version != Checkpoint::kFormatVersion)
    throw CheckpointError("checkpoint format version " + std::to_string(version) +
                          " unsupported; expected " +
                          std::to_string(Checkpoint::kFormatVersion));
  Checkpoint ckpt;
  ckpt.config = config_from_header(read_string(is));
  ckpt.config.validate();
  ckpt.step = static_cast<long>(read_u64(is));
  ckpt.rng_state = read_u64(is);
  ckpt.net = std::make_shared<Network>(ckpt.config.net, ckpt.config.seed);
  read_param_blocks(is, ckpt.net->params());
  return ckpt;
}

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log,
                         int trajectory_depth) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write training log " + path);
  os << "step,phase,recon_in,recon_gt,recon_traj,style,rep_dec,w_recon,route,k_recon,total";
  for (int k = 0; k <= trajectory_depth; ++k) os << ",kbar_" << k;
  os << "\n";
  for (const TrainLogRow& r : log) {
    os << r.step << "," << r.phase << "," << fmt_double(r.recon_in) << ","
       << fmt_double(r.recon_gt) << "," << fmt_double(r.recon_traj) << ","
       << fmt_double(r.style) << "," << fmt_double(r.rep_dec) << ","
       << fmt_double(r.w_recon) << "," << fmt_double(r.route) << ","
       << fmt_double(r.k_recon) << "," << fmt_double(r.total);
    for (int k = 0; k <= trajectory_depth; ++k)
      os << "," << (k < static_cast<int>(r.kbar_counts.size()) ? r.kbar_counts[k] : 0);
    os << "\n";
  }
}

}  // namespace uie
