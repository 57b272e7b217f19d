#pragma once

#include <vector>

#include "uie/extractor.hpp"
#include "uie/image.hpp"
#include "uie/tape.hpp"

namespace uie {

// All reductions are means so magnitudes are resolution independent.
struct LossWeights {
  double l1 = 1.0;
  double l2 = 1.0;
  double str = 1.0;
  double grad = 0.5;
  double perc = 0.1;
  double style = 1.0;
  double rep_dec = 1.0;
  double w_recon = 1.0;
  double route = 0.1;
  double k_recon = 0.5;

  void validate() const;
};

namespace losses {

// graph builders --------------------------------------------------------
Value pixel(Tape& t, Value a, Value b, const LossWeights& w);
Value grad(Tape& t, Value a, Value b);
Value perceptual(Tape& t, Value a, Value b, const FeatureExtractor& ex);
Value recon(Tape& t, Value a, Value b, const LossWeights& w, const FeatureExtractor& ex);
Value style(Tape& t, Value s1, Value s2);
Value rep_dec(Tape& t, Value i0, Value igt, Value r0, Value rgt, Value r1, Value s1,
              Value sgt, const LossWeights& w, const FeatureExtractor& ex);
Value route(Tape& t, Value logits, int label);
Value k_recon(Tape& t, int kbar, Value igt, const std::vector<Value>& trajectory_decodes,
              const LossWeights& w, const FeatureExtractor& ex);
Value ada_mod(Tape& t, Value rep_dec_term, Value w_recon_term, Value route_term,
              Value k_recon_term, const LossWeights& w);

// eager conveniences -----------------------------------------------------
double pixel(const Image& a, const Image& b, const LossWeights& w);
double grad(const Image& a, const Image& b);
double perceptual(const Image& a, const Image& b, const FeatureExtractor& ex);
double recon(const Image& a, const Image& b, const LossWeights& w,
             const FeatureExtractor& ex);
double style(const Tensor& s1, const Tensor& s2);
double route(const std::vector<double>& logits, int label);
double ada_mod(double rep_dec_term, double w_recon_term, double route_term,
               double k_recon_term, const LossWeights& w);

// the normalized channel-similarity statistic used by the style loss and
// the router: X * X^T / (rows * cols)
Tensor gram_matrix(const Tensor& x);

}  // namespace losses
}  // namespace uie
