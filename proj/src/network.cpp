#include "uie/network.hpp"

#include <cmath>

#include "uie/rng.hpp"

namespace uie {

void NetConfig::validate() const {
  if (rep_channels < 1 || style_channels < 1)
    throw ConfigError("net: channel widths must be positive");
  if (n_reb < 1 || n_seb < 1) throw ConfigError("net: block counts must be >= 1");
  if (n_reb != n_seb)
    throw ConfigError("net: paired per-stage conditioning requires n_reb == n_seb");
  if (style_downsample < 2 || (style_downsample & (style_downsample - 1)) != 0)
    throw ConfigError("net: style downsample must be a power of two >= 2");
  if (proj_dim < 1 || proj_dim > style_channels)
    throw ConfigError("net: proj_dim must be in [1, style_channels]");
  if (mlp_hidden < 1) throw ConfigError("net: mlp_hidden must be positive");
}

int NetConfig::pool_stages() const {
  int s = 0;
  for (int d = style_downsample; d > 1; d >>= 1) ++s;
  return s;
}

std::string NetConfig::describe() const {
  return "enc[conv3x3x2,silu]+grad(sobel,bt601) down[avgpool2+conv3x3,silu]x" +
         std::to_string(pool_stages()) + " dec[conv3x3x2,silu,1x1,sigmoid] " +
         "reb/seb[residual conv3x3x2,silu,zero-init-second] inject[bilinear-up,1x1,zero-init] " +
         "router[gram,bilinear-proj,gap,mlp,silu]";
}

Value grad_map(Tape& t, Value image) {
  return ops::sobel_pair(t, ops::grayscale(t, image));
}

Tensor grad_map(const Image& image) {
  Tape t(false);
  return t.val(grad_map(t, t.constant(tensor_from_image(image))));
}

Network::Network(NetConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(init_seed);
  const int cc = cfg_.rep_channels, cs = cfg_.style_channels;

  auto conv = [&](const std::string& name, int k, int cin, int cout, bool zero) {
    Tensor w = zero ? Tensor({k * k * cin, cout})
                    : he_normal({k * k * cin, cout}, k * k * cin, rng);
    params_.add(name + ".w", std::move(w));
    params_.add(name + ".b", Tensor({cout}));
  };

  // encoder/decoder
  conv("encdec.conv_in1", 3, 5, cc, false);  // rgb + 2 gradient channels
  conv("encdec.conv_in2", 3, cc, cc, false);
  for (int s = 0; s < cfg_.pool_stages(); ++s)
    conv("encdec.down" + std::to_string(s + 1), 3, s == 0 ? cc : cs, cs, false);
  conv("encdec.conv_out1", 3, cc, cc, false);
  conv("encdec.conv_out2", 3, cc, cc, false);
  conv("encdec.to_rgb", 1, cc, 3, false);

  // shared recursive unit: paired REB/SEB stages with zero-initialized
  // residual branches so recursion starts from identity, plus zero-init
  // injections so conditioning starts inert.
  for (int i = 0; i < cfg_.n_reb; ++i) {
    const std::string si = std::to_string(i);
    conv("sreu.reb" + si + ".conv1", 3, cc, cc, false);
    conv("sreu.reb" + si + ".conv2", 3, cc, cc, true);
    conv("sreu.seb" + si + ".conv1", 3, cs, cs, false);
    conv("sreu.seb" + si + ".conv2", 3, cs, cs, true);
    conv("sreu.inject" + si, 1, cs, cc, true);
  }

  // router
  params_.add("router.proj_a", he_normal({cfg_.proj_dim, cs}, cs, rng));
  params_.add("router.proj_b", he_normal({cfg_.proj_dim, cs}, cs, rng));
  const int feat = cfg_.proj_dim * cfg_.proj_dim + cs;
  params_.add("router.mlp1.w", he_normal({cfg_.mlp_hidden, feat}, feat, rng));
  params_.add("router.mlp1.b", Tensor({cfg_.mlp_hidden}));
  params_.add("router.mlp2.w", he_normal({1, cfg_.mlp_hidden}, cfg_.mlp_hidden, rng));
  params_.add("router.mlp2.b", Tensor({1}));
}

void Network::check_resolution(int h, int w) const {
  if (h % cfg_.style_downsample || w % cfg_.style_downsample)
    throw ConfigError("net: resolution " + std::to_string(h) + "x" + std::to_string(w) +
                      " not divisible by style downsample " +
                      std::to_string(cfg_.style_downsample));
}

namespace {

Value conv_act(Tape& t, const ParamStore& ps, const std::string& name, Value x, int k) {
  Value y = ops::conv2d(t, x, t.param(ps.get(name + ".w")), t.param(ps.get(name + ".b")), k);
  return ops::silu(t, y);
}

}  // namespace

std::pair<Value, Value> Network::encode(Tape& t, Value image) const {
  const Tensor& img = t.val(image);
  if (img.rank() != 3 || img.dim(2) != 3)
    throw ConfigError("encode: input must be {H,W,3}");
  check_resolution(img.dim(0), img.dim(1));

  Value x = ops::concat_channels(t, image, grad_map(t, image));
  Value h = conv_act(t, params_, "encdec.conv_in1", x, 3);
  Value rep = conv_act(t, params_, "encdec.conv_in2", h, 3);

  Value s = rep;
  for (int stage = 0; stage < cfg_.pool_stages(); ++stage) {
    s = ops::avg_pool2(t, s);
    s = conv_act(t, params_, "encdec.down" + std::to_string(stage + 1), s, 3);
  }
  return {rep, s};
}

Value Network::decode(Tape& t, Value rep) const {
  const Tensor& r = t.val(rep);
  if (r.rank() != 3 || r.dim(2) != cfg_.rep_channels)
    throw ConfigError("decode: representation shape mismatch, got " + r.shape_str());
  Value h = conv_act(t, params_, "encdec.conv_out1", rep, 3);
  h = conv_act(t, params_, "encdec.conv_out2", h, 3);
  Value rgb = ops::conv2d(t, h, t.param(params_.get("encdec.to_rgb.w")),
                          t.param(params_.get("encdec.to_rgb.b")), 1);
  return ops::sigmoid(t, rgb);
}

Value Network::reb(Tape& t, Value x, int i) const {
  const std::string base = "sreu.reb" + std::to_string(i);
  Value h = conv_act(t, params_, base + ".conv1", x, 3);
  return ops::conv2d(t, h, t.param(params_.get(base + ".conv2.w")),
                     t.param(params_.get(base + ".conv2.b")), 3);
}

Value Network::seb(Tape& t, Value x, int i) const {
  const std::string base = "sreu.seb" + std::to_string(i);
  Value h = conv_act(t, params_, base + ".conv1", x, 3);
  return ops::conv2d(t, h, t.param(params_.get(base + ".conv2.w")),
                     t.param(params_.get(base + ".conv2.b")), 3);
}

std::pair<Value, Value> Network::refine_step(Tape& t, Value rep, Value style) const {
  const Tensor& r = t.val(rep);
  const Tensor& s = t.val(style);
  if (r.rank() != 3 || r.dim(2) != cfg_.rep_channels)
    throw ConfigError("refine_step: representation shape mismatch, got " + r.shape_str());
  if (s.rank() != 3 || s.dim(2) != cfg_.style_channels ||
      s.dim(0) * cfg_.style_downsample != r.dim(0) ||
      s.dim(1) * cfg_.style_downsample != r.dim(1))
    throw ConfigError("refine_step: style shape mismatch, got " + s.shape_str());

  Value c = rep, st = style;
  for (int i = 0; i < cfg_.n_reb; ++i) {
    st = ops::add(t, st, seb(t, st, i));
    // evolved style conditions the representation stream: bilinear
    // upsample, 1x1 projection, channel-wise residual
    Value up = ops::upsample_bilinear(t, st, cfg_.style_downsample);
    const std::string inj = "sreu.inject" + std::to_string(i);
    Value cond = ops::conv2d(t, up, t.param(params_.get(inj + ".w")),
                             t.param(params_.get(inj + ".b")), 1);
    c = ops::add(t, ops::add(t, c, reb(t, c, i)), cond);
  }
  return {c, st};
}

std::pair<Value, Value> Network::router_logit(Tape& t, Value style) const {
  const Tensor& s = t.val(style);
  if (s.rank() != 3 || s.dim(2) != cfg_.style_channels)
    throw ConfigError("router_logit: style shape mismatch, got " + s.shape_str());
  Value g = ops::gram(t, ops::channels_to_rows(t, style));
  Value pa = t.param(params_.get("router.proj_a"));
  Value pb = t.param(params_.get("router.proj_b"));
  Value compressed = ops::matmul(t, ops::matmul(t, pa, g), ops::transpose(t, pb));
  Value feat = ops::concat(t, ops::flatten(t, compressed), ops::global_avg_pool(t, style));
  Value hidden = ops::silu(t, ops::linear(t, t.param(params_.get("router.mlp1.w")), feat,
                                          t.param(params_.get("router.mlp1.b"))));
  Value logit = ops::linear(t, t.param(params_.get("router.mlp2.w")), hidden,
                            t.param(params_.get("router.mlp2.b")));
  return {logit, hidden};
}

Value Network::forward_once(Tape& t, Value image) const {
  auto [rep, style] = encode(t, image);
  auto [rep1, style1] = refine_step(t, rep, style);
  return decode(t, rep1);
}

std::pair<Tensor, Tensor> Network::encode_image(const Image& image) const {
  Tape t(false);
  auto [rep, style] = encode(t, t.constant(tensor_from_image(image)));
  return {t.val(rep), t.val(style)};
}

Image Network::decode_rep(const Tensor& rep) const {
  Tape t(false);
  return image_from_tensor(t.val(decode(t, t.constant(rep))));
}

std::pair<Tensor, Tensor> Network::refine(const Tensor& rep, const Tensor& style) const {
  Tape t(false);
  auto [r, s] = refine_step(t, t.constant(rep), t.constant(style));
  return {t.val(r), t.val(s)};
}

Image Network::enhance_once(const Image& image) const {
  Tape t(false);
  return image_from_tensor(t.val(forward_once(t, t.constant(tensor_from_image(image)))));
}

double Network::router_logit_value(const Tensor& style) const {
  Tape t(false);
  return t.val(router_logit(t, t.constant(style)).first)[0];
}

Tensor Network::router_hidden(const Tensor& style) const {
  Tape t(false);
  return t.val(router_logit(t, t.constant(style)).second);
}

}  // namespace uie
