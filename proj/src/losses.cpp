#include "uie/losses.hpp"

#include "uie/network.hpp"
#include "uie/ops.hpp"

namespace uie {

void LossWeights::validate() const {
  for (double v : {l1, l2, str, grad, perc, style, rep_dec, w_recon, route, k_recon})
    if (v < 0.0 || !std::isfinite(v))
      throw ConfigError("loss weights must be finite and non-negative");
}

namespace losses {

Value pixel(Tape& t, Value a, Value b, const LossWeights& w) {
  require_same_shape(t.val(a), t.val(b), "pixel loss");
  Value d = ops::sub(t, a, b);
  return ops::add(t, ops::scale(t, ops::mean_abs(t, d), w.l1),
                  ops::scale(t, ops::mean_sq(t, d), w.l2));
}

Value grad(Tape& t, Value a, Value b) {
  require_same_shape(t.val(a), t.val(b), "grad loss");
  return ops::mean_abs(t, ops::sub(t, grad_map(t, a), grad_map(t, b)));
}

Value perceptual(Tape& t, Value a, Value b, const FeatureExtractor& ex) {
  require_same_shape(t.val(a), t.val(b), "perceptual loss");
  Value d = ops::sub(t, ex.features(t, a), ex.features(t, b));
  return ops::sqrt_scalar(t, ops::mean_sq(t, d));
}

Value recon(Tape& t, Value a, Value b, const LossWeights& w, const FeatureExtractor& ex) {
  Value out = ops::scale(t, pixel(t, a, b, w), w.str);
  out = ops::add(t, out, ops::scale(t, grad(t, a, b), w.grad));
  if (w.perc > 0.0) out = ops::add(t, out, ops::scale(t, perceptual(t, a, b, ex), w.perc));
  return out;
}

Value style(Tape& t, Value s1, Value s2) {
  require_same_shape(t.val(s1), t.val(s2), "style loss");
  Value g1 = ops::gram(t, ops::channels_to_rows(t, s1));
  Value g2 = ops::gram(t, ops::channels_to_rows(t, s2));
  return ops::mean_sq(t, ops::sub(t, g1, g2));
}

Value rep_dec(Tape& t, Value i0, Value igt, Value r0, Value rgt, Value r1, Value s1,
              Value sgt, const LossWeights& w, const FeatureExtractor& ex) {
  Value out = recon(t, i0, r0, w, ex);
  out = ops::add(t, out, recon(t, igt, rgt, w, ex));
  out = ops::add(t, out, recon(t, igt, r1, w, ex));
  return ops::add(t, out, ops::scale(t, style(t, s1, sgt), w.style));
}

Value route(Tape& t, Value logits, int label) {
  return ops::ce_with_logits(t, logits, label);
}

Value k_recon(Tape& t, int kbar, Value igt, const std::vector<Value>& trajectory_decodes,
              const LossWeights& w, const FeatureExtractor& ex) {
  if (kbar < 0 || kbar >= static_cast<int>(trajectory_decodes.size()))
    throw ConfigError("k_recon: pseudo-label out of range");
  if (kbar == 0) return t.constant(Tensor::scalar(0.0));
  return recon(t, igt, trajectory_decodes[kbar], w, ex);
}

Value ada_mod(Tape& t, Value rep_dec_term, Value w_recon_term, Value route_term,
              Value k_recon_term, const LossWeights& w) {
  Value out = ops::scale(t, rep_dec_term, w.rep_dec);
  out = ops::add(t, out, ops::scale(t, w_recon_term, w.w_recon));
  out = ops::add(t, out, ops::scale(t, route_term, w.route));
  return ops::add(t, out, ops::scale(t, k_recon_term, w.k_recon));
}

namespace {

double eval_image_pair(const Image& a, const Image& b,
                       const std::function<Value(Tape&, Value, Value)>& fn) {
  Tape t(false);
  Value va = t.constant(tensor_from_image(a));
  Value vb = t.constant(tensor_from_image(b));
  return t.val(fn(t, va, vb))[0];
}

}  // namespace

double pixel(const Image& a, const Image& b, const LossWeights& w) {
  return eval_image_pair(a, b, [&](Tape& t, Value x, Value y) { return pixel(t, x, y, w); });
}

double grad(const Image& a, const Image& b) {
  return eval_image_pair(a, b, [&](Tape& t, Value x, Value y) { return grad(t, x, y); });
}

double perceptual(const Image& a, const Image& b, const FeatureExtractor& ex) {
  return eval_image_pair(a, b,
                         [&](Tape& t, Value x, Value y) { return perceptual(t, x, y, ex); });
}

double recon(const Image& a, const Image& b, const LossWeights& w,
             const FeatureExtractor& ex) {
  return eval_image_pair(a, b,
                         [&](Tape& t, Value x, Value y) { return recon(t, x, y, w, ex); });
}

double style(const Tensor& s1, const Tensor& s2) {
  Tape t(false);
  return t.val(style(t, t.constant(s1), t.constant(s2)))[0];
}

double route(const std::vector<double>& logits, int label) {
  Tape t(false);
  Tensor z({static_cast<int>(logits.size())}, DataVec(logits.begin(), logits.end()));
  return t.val(route(t, t.constant(std::move(z)), label))[0];
}

double ada_mod(double rep_dec_term, double w_recon_term, double route_term,
               double k_recon_term, const LossWeights& w) {
  return w.rep_dec * rep_dec_term + w.w_recon * w_recon_term + w.route * route_term +
         w.k_recon * k_recon_term;
}

Tensor gram_matrix(const Tensor& x) {
  Tape t(false);
  return t.val(ops::gram(t, t.constant(x)));
}

}  // namespace losses
}  // namespace uie
