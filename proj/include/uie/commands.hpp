#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uie/metrics.hpp"
#include "uie/trainer.hpp"

namespace uie {

inline constexpr const char* kToolVersion = "0.1.0";

struct SynthOptions {
  std::string out_dir;
  int n = 8;
  std::vector<double> tiers{0.2, 0.8};
  uint64_t seed = 0;
  int resolution = 256;
  bool force = false;
};

struct TrainOptions {
  std::string data_dir;
  std::string out_dir;
  TrainConfig cfg;
};

struct EnhanceOptions {
  std::string checkpoint;
  std::string input_dir;  // dataset root (with input/) or plain image directory
  std::string out_dir;
  bool dump_states = false;
};

struct EvaluateOptions {
  std::string data_dir;  // paired dataset root
  std::string out_dir;
  std::string checkpoint;  // optional: evaluate enhanced outputs
  std::string pred_dir;    // optional: evaluate pre-rendered images against gt
  int resolution = 256;    // used when no checkpoint fixes it
};

struct AblateOptions {
  std::string data_dir;
  std::string out_dir;
  std::vector<std::string> arms;  // empty = all
  TrainConfig base;
};

struct RouteVizOptions {
  std::string checkpoint;
  std::string data_dir;  // paired dataset root; gt is required
  std::string out_dir;
};

void cmd_synth(const SynthOptions& opt);
void cmd_train(const TrainOptions& opt);
void cmd_enhance(const EnhanceOptions& opt);
MetricReport cmd_evaluate(const EvaluateOptions& opt);
void cmd_ablate(const AblateOptions& opt);
void cmd_route_viz(const RouteVizOptions& opt);

const std::vector<std::string>& valid_ablate_arms(int max_depth);

// report emission shared by evaluate/ablate
void write_metric_report_csv(const std::string& path, const MetricReport& report);
void write_metric_report_json(const std::string& path, const MetricReport& report);

}  // namespace uie
