// Brute-force reference implementations and finite-difference helpers used
// as independent oracles. Everything here is written straight from the
// definitions with plain loops; none of it shares code with the library
// paths under test.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "uie/image.hpp"
#include "uie/rng.hpp"
#include "uie/tensor.hpp"

namespace oracle {

inline double rel_err(double analytic, double reference) {
  double denom = std::max({std::abs(analytic), std::abs(reference), 1e-12});
  return std::abs(analytic - reference) / denom;
}

// central-difference derivative of f at x
inline double fd(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

// direct nested-loop convolution, reflect-101 padding, stride 1.
// weights indexed [dy][dx][cin][cout] flattened.
inline uie::Tensor conv2d_naive(const uie::Tensor& x, const uie::Tensor& w,
                                const uie::Tensor& b, int k) {
  const int h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
  const int cout = w.dim(1);
  const int half = k / 2;
  uie::Tensor out({h, wd, cout});
  for (int y = 0; y < h; ++y)
    for (int xo = 0; xo < wd; ++xo)
      for (int oc = 0; oc < cout; ++oc) {
        double acc = b[oc];
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            for (int ic = 0; ic < cin; ++ic) {
              double v = x.at(reflect(y + dy - half, h), reflect(xo + dx - half, wd), ic);
              acc += v * w.at((dy * k + dx) * cin + ic, oc);
            }
        out.at(y, xo, oc) = acc;
      }
  return out;
}

// double-loop Gram matrix: G[i][j] = (1/(a*b)) * sum_k x[i,k]*x[j,k]
inline uie::Tensor gram_naive(const uie::Tensor& x) {
  const int a = x.dim(0), b = x.dim(1);
  uie::Tensor g({a, a});
  for (int i = 0; i < a; ++i)
    for (int j = 0; j < a; ++j) {
      double acc = 0;
      for (int k = 0; k < b; ++k) acc += x.at(i, k) * x.at(j, k);
      g.at(i, j) = acc / (static_cast<double>(a) * b);
    }
  return g;
}

// softmax without the max-subtraction trick (valid at small magnitudes only)
inline std::vector<double> softmax_naive(const std::vector<double>& z) {
  double denom = 0;
  std::vector<double> out(z.size());
  for (double v : z) denom += std::exp(v);
  for (size_t i = 0; i < z.size(); ++i) out[i] = std::exp(z[i]) / denom;
  return out;
}

inline double ce_naive(const std::vector<double>& z, int label) {
  return -std::log(softmax_naive(z)[static_cast<size_t>(label)]);
}

inline double psnr_naive(const uie::Image& a, const uie::Image& b) {
  double mse = 0;
  for (size_t i = 0; i < a.px.size(); ++i) {
    double d = a.px[i] - b.px[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.px.size());
  if (mse <= 0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

inline uie::Tensor random_tensor(std::vector<int> shape, uie::Rng& rng, double lo = -1.0,
                                 double hi = 1.0) {
  uie::Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

inline uie::Image random_image(int h, int w, uie::Rng& rng) {
  uie::Image img(h, w);
  for (double& v : img.px) v = rng.uniform();
  return img;
}

// mean|a-b| and mean (a-b)^2 with plain loops
inline double l1_naive(const uie::Tensor& a, const uie::Tensor& b) {
  double acc = 0;
  for (size_t i = 0; i < a.data.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.numel());
}

inline double l2_naive(const uie::Tensor& a, const uie::Tensor& b) {
  double acc = 0;
  for (size_t i = 0; i < a.data.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.numel());
}

}  // namespace oracle
