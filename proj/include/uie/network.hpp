#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "uie/image.hpp"
#include "uie/ops.hpp"
#include "uie/params.hpp"
#include "uie/tape.hpp"

namespace uie {

struct NetConfig {
  int rep_channels = 32;     // representation width
  int style_channels = 64;   // style width
  int style_downsample = 4;  // power of two; pool stages = log2
  int n_reb = 3;             // representation enhancement blocks
  int n_seb = 3;             // style evolution blocks, paired with REBs
  int proj_dim = 8;          // Gram compression target
  int mlp_hidden = 128;

  void validate() const;
  int pool_stages() const;

  // stable architecture description recorded in checkpoints
  std::string describe() const;
};

// Deterministic gradient map: BT.601 grayscale followed by fixed Sobel
// convolutions with reflect padding. Channel 0 = horizontal response,
// channel 1 = vertical.
Value grad_map(Tape& t, Value image);
Tensor grad_map(const Image& image);

// The enhancement network: encoder/decoder, the shared recursive unit that
// advances one (rep, style) state per call, and the state router.
class Network {
 public:
  Network(NetConfig cfg, uint64_t init_seed);

  const NetConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // graph builders -----------------------------------------------------
  std::pair<Value, Value> encode(Tape& t, Value image) const;  // (rep, style)
  Value decode(Tape& t, Value rep) const;
  std::pair<Value, Value> refine_step(Tape& t, Value rep, Value style) const;
  // shared router evaluated per state: (logit {1}, pre-logit hidden {mlp_hidden})
  std::pair<Value, Value> router_logit(Tape& t, Value style) const;
  // full single pass decode(refine(encode(image)))
  Value forward_once(Tape& t, Value image) const;

  // value-level conveniences (fresh no-grad tape per call) --------------
  std::pair<Tensor, Tensor> encode_image(const Image& image) const;
  Image decode_rep(const Tensor& rep) const;
  std::pair<Tensor, Tensor> refine(const Tensor& rep, const Tensor& style) const;
  Image enhance_once(const Image& image) const;
  double router_logit_value(const Tensor& style) const;
  Tensor router_hidden(const Tensor& style) const;

  void check_resolution(int h, int w) const;

 private:
  Value reb(Tape& t, Value x, int i) const;
  Value seb(Tape& t, Value x, int i) const;

  NetConfig cfg_;
  ParamStore params_;
};

}  // namespace uie
