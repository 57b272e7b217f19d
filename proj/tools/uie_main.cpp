// Command line front end: data synthesis, training, inference, evaluation,
// ablations and routing analysis over the enhancement library.

#include <CLI11.hpp>
#include <iostream>

#include "uie/commands.hpp"

namespace {

void add_train_config_flags(CLI::App* cmd, uie::TrainConfig& cfg) {
  cmd->add_option("--res", cfg.resolution_h, "working resolution (square)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--phase1-steps", cfg.phase1_steps, "phase 1 optimization steps");
  cmd->add_option("--phase2-steps", cfg.phase2_steps,
                  "phase 2 optimization steps (0 skips routing training)");
  cmd->add_option("--pseudo-label-start", cfg.pseudo_label_start_fraction,
                  "fraction of phase 2 after which pseudo-label losses activate");
  cmd->add_option("--lr", cfg.learning_rate, "learning rate");
  cmd->add_option("--router-lr-mult", cfg.router_lr_multiplier,
                  "learning-rate multiplier for the router parameters");
  cmd->add_option("--batch", cfg.batch_size, "batch size");
  cmd->add_option("--seed", cfg.seed, "random seed");
  cmd->add_option("--k", cfg.trajectory_depth, "trajectory depth (candidate states - 1)");
  cmd->add_option("--rep-channels", cfg.net.rep_channels, "representation width");
  cmd->add_option("--style-channels", cfg.net.style_channels, "style width");
  cmd->add_option("--style-downsample", cfg.net.style_downsample, "style downsample factor");
  cmd->add_option("--blocks", cfg.net.n_reb, "paired enhancement/evolution block count");
  cmd->add_option("--proj-dim", cfg.net.proj_dim, "router Gram compression size");
  cmd->add_option("--mlp-hidden", cfg.net.mlp_hidden, "router MLP hidden width");
  cmd->add_option("--lambda-l1", cfg.loss.l1, "pixel L1 weight");
  cmd->add_option("--lambda-l2", cfg.loss.l2, "pixel L2 weight");
  cmd->add_option("--lambda-str", cfg.loss.str, "pixel term weight");
  cmd->add_option("--lambda-grad", cfg.loss.grad, "gradient term weight");
  cmd->add_option("--lambda-perc", cfg.loss.perc, "perceptual term weight");
  cmd->add_option("--lambda-style", cfg.loss.style, "style decoupling weight");
  cmd->add_option("--lambda-rep-dec", cfg.loss.rep_dec, "decoupling objective weight");
  cmd->add_option("--lambda-w-recon", cfg.loss.w_recon, "fused reconstruction weight");
  cmd->add_option("--lambda-route", cfg.loss.route, "routing cross-entropy weight");
  cmd->add_option("--lambda-k-recon", cfg.loss.k_recon, "pseudo-label reconstruction weight");
  cmd->add_option("--extractor", cfg.extractor,
                  "perceptual extractor: pyramid | pyramid:<stage> | vgg19:<weights>");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive underwater image enhancement toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "configuration file (key = value, with [sections])");
  app.allow_config_extras(CLI::config_extras_mode::ignore_all);

  uie::SynthOptions synth_opt;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic degraded dataset");
  synth->configurable(true);
  synth->fallthrough(true);
  synth->add_option("--out", synth_opt.out_dir, "output dataset directory")->required();
  synth->add_option("--n", synth_opt.n, "number of pairs");
  synth->add_option("--tiers", synth_opt.tiers, "severity tiers in [0,1]")->delimiter(',');
  synth->add_option("--seed", synth_opt.seed, "random seed");
  synth->add_option("--res", synth_opt.resolution, "image resolution");
  synth->add_flag("--force", synth_opt.force, "overwrite a non-empty output directory");

  uie::TrainOptions train_opt;
  CLI::App* train = app.add_subcommand("train", "run the two-phase training recipe");
  train->configurable(true);
  train->fallthrough(true);
  train->add_option("--data", train_opt.data_dir, "dataset root with input/ and gt/")
      ->required();
  train->add_option("--out", train_opt.out_dir, "output directory")->required();
  add_train_config_flags(train, train_opt.cfg);

  uie::EnhanceOptions enh_opt;
  CLI::App* enh = app.add_subcommand("enhance", "enhance images with a trained checkpoint");
  enh->configurable(true);
  enh->fallthrough(true);
  enh->add_option("--ckpt", enh_opt.checkpoint, "checkpoint file")->required();
  enh->add_option("--input", enh_opt.input_dir, "image directory or dataset root")
      ->required();
  enh->add_option("--out", enh_opt.out_dir, "output directory")->required();
  enh->add_flag("--dump-states", enh_opt.dump_states,
                "also write the decoded candidate state images");

  uie::EvaluateOptions eval_opt;
  CLI::App* eval = app.add_subcommand("evaluate", "compute quality metrics over a dataset");
  eval->configurable(true);
  eval->fallthrough(true);
  eval->add_option("--data", eval_opt.data_dir, "dataset root with input/ and gt/")
      ->required();
  eval->add_option("--out", eval_opt.out_dir, "output directory")->required();
  eval->add_option("--ckpt", eval_opt.checkpoint, "evaluate enhanced outputs of this model");
  eval->add_option("--pred", eval_opt.pred_dir, "evaluate pre-rendered images against gt");
  eval->add_option("--res", eval_opt.resolution, "resolution when no checkpoint is given");

  uie::AblateOptions abl_opt;
  CLI::App* abl = app.add_subcommand("ablate", "train and compare ablation arms");
  abl->configurable(true);
  abl->fallthrough(true);
  abl->add_option("--data", abl_opt.data_dir, "dataset root")->required();
  abl->add_option("--out", abl_opt.out_dir, "output directory")->required();
  abl->add_option("--arms", abl_opt.arms,
                  "arms: full wo-decouple wo-route k1..k4 internal-cascade "
                  "external-cascade state-<k>")
      ->delimiter(',');
  add_train_config_flags(abl, abl_opt.base);

  uie::RouteVizOptions viz_opt;
  CLI::App* viz = app.add_subcommand("route-viz", "project routing vectors to 2-D");
  viz->configurable(true);
  viz->fallthrough(true);
  viz->add_option("--ckpt", viz_opt.checkpoint, "checkpoint file")->required();
  viz->add_option("--data", viz_opt.data_dir, "dataset root (gt required)")->required();
  viz->add_option("--out", viz_opt.out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      uie::cmd_synth(synth_opt);
    } else if (*train) {
      train_opt.cfg.resolution_w = train_opt.cfg.resolution_h;
      train_opt.cfg.net.n_seb = train_opt.cfg.net.n_reb;  // paired by design
      uie::cmd_train(train_opt);
    } else if (*enh) {
      uie::cmd_enhance(enh_opt);
    } else if (*eval) {
      uie::cmd_evaluate(eval_opt);
    } else if (*abl) {
      abl_opt.base.resolution_w = abl_opt.base.resolution_h;
      abl_opt.base.net.n_seb = abl_opt.base.net.n_reb;
      uie::cmd_ablate(abl_opt);
    } else if (*viz) {
      uie::cmd_route_viz(viz_opt);
    }
  } catch (const uie::Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
