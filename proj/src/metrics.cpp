#include "uie/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "uie/ops.hpp"

namespace uie {

namespace {

void require_pair(const Image& a, const Image& b, const char* where) {
  if (!a.same_dims(b)) throw DataError(std::string(where) + ": image dimensions differ");
}

double luminance(const Image& img, int y, int x) {
  return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_pair(a, b, "psnr");
  double mse = 0;
  for (size_t i = 0; i < a.px.size(); ++i) {
    double d = a.px[i] - b.px[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.px.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) {
  require_pair(a, b, "ssim");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5, kC1 = 1e-4, kC2 = 9e-4;
  if (a.height < kWin || a.width < kWin)
    throw DataError("ssim: image smaller than the 11x11 window");

  double kernel[kWin];
  double ksum = 0;
  for (int i = 0; i < kWin; ++i) {
    double d = i - (kWin - 1) / 2.0;
    kernel[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    ksum += kernel[i];
  }
  for (double& k : kernel) k /= ksum;

  const int h = a.height, w = a.width;
  std::vector<double> la(static_cast<size_t>(h) * w), lb(la.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      la[static_cast<size_t>(y) * w + x] = luminance(a, y, x);
      lb[static_cast<size_t>(y) * w + x] = luminance(b, y, x);
    }

  const int oh = h - kWin + 1, ow = w - kWin + 1;
  double acc = 0;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
      for (int dy = 0; dy < kWin; ++dy)
        for (int dx = 0; dx < kWin; ++dx) {
          double wgt = kernel[dy] * kernel[dx];
          double pa = la[static_cast<size_t>(y + dy) * w + (x + dx)];
          double pb = lb[static_cast<size_t>(y + dy) * w + (x + dx)];
          ma += wgt * pa;
          mb += wgt * pb;
          va += wgt * pa * pa;
          vb += wgt * pb * pb;
          cov += wgt * pa * pb;
        }
      va -= ma * ma;
      vb -= mb * mb;
      cov -= ma * mb;
      acc += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
             ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
    }
  return acc / (static_cast<double>(oh) * ow);
}

// ---------------------------------------------------------------------------
// UIQM (statistical colorfulness / sharpness / contrast composite)

namespace {

constexpr int kBlock = 8;
constexpr double kTrim = 0.1;

// asymmetric alpha-trimmed mean plus variance about it
void trimmed_stats(std::vector<double> v, double& mean_out, double& var_out) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  const size_t cut = static_cast<size_t>(kTrim * n);
  double acc = 0;
  size_t cnt = 0;
  for (size_t i = cut; i + cut < n; ++i) {
    acc += v[i];
    ++cnt;
  }
  mean_out = cnt ? acc / cnt : 0.0;
  double var = 0;
  for (double x : v) var += (x - mean_out) * (x - mean_out);
  var_out = var / n;
}

double sobel_mag_at(const std::vector<double>& ch, int h, int w, int y, int x) {
  static const double gx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static const double gy[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  double sx = 0, sy = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      double v = ch[static_cast<size_t>(reflect_index(y + dy, h)) * w +
                    reflect_index(x + dx, w)];
      sx += gx[dy + 1][dx + 1] * v;
      sy += gy[dy + 1][dx + 1] * v;
    }
  return std::sqrt(sx * sx + sy * sy);
}

// block log-contrast (EME) over full blocks; degenerate blocks contribute 0
double eme(const std::vector<double>& ch, int h, int w) {
  const int by = h / kBlock, bx = w / kBlock;
  if (by == 0 || bx == 0) return 0.0;
  double acc = 0;
  for (int b = 0; b < by; ++b)
    for (int c = 0; c < bx; ++c) {
      double mx = 0, mn = 1e300;
      for (int y = b * kBlock; y < (b + 1) * kBlock; ++y)
        for (int x = c * kBlock; x < (c + 1) * kBlock; ++x) {
          double v = ch[static_cast<size_t>(y) * w + x];
          mx = std::max(mx, v);
          mn = std::min(mn, v);
        }
      if (mx > mn && mn > 0.0) acc += std::log(mx / mn);
    }
  return 2.0 * acc / (static_cast<double>(by) * bx);
}

// block log-AMEE entropy on luminance; degenerate blocks contribute 0
double log_amee(const std::vector<double>& lum, int h, int w) {
  const int by = h / kBlock, bx = w / kBlock;
  if (by == 0 || bx == 0) return 0.0;
  double acc = 0;
  for (int b = 0; b < by; ++b)
    for (int c = 0; c < bx; ++c) {
      double mx = 0, mn = 1e300;
      for (int y = b * kBlock; y < (b + 1) * kBlock; ++y)
        for (int x = c * kBlock; x < (c + 1) * kBlock; ++x) {
          double v = lum[static_cast<size_t>(y) * w + x];
          mx = std::max(mx, v);
          mn = std::min(mn, v);
        }
      if (mx > mn && mx + mn > 0.0) {
        double r = (mx - mn) / (mx + mn);
        acc += -r * std::log(r);
      }
    }
  return acc / (static_cast<double>(by) * bx);
}

}  // namespace

UiqmComponents uiqm_components(const Image& img) {
  const int h = img.height, w = img.width;
  const size_t n = static_cast<size_t>(h) * w;

  std::vector<double> rg(n), yb(n), lum(n);
  std::vector<double> chan[3] = {std::vector<double>(n), std::vector<double>(n),
                                 std::vector<double>(n)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      size_t i = static_cast<size_t>(y) * w + x;
      double r = img.at(y, x, 0), g = img.at(y, x, 1), b = img.at(y, x, 2);
      rg[i] = r - g;
      yb[i] = 0.5 * (r + g) - b;
      lum[i] = 0.299 * r + 0.587 * g + 0.114 * b;
      chan[0][i] = r;
      chan[1][i] = g;
      chan[2][i] = b;
    }

  UiqmComponents out;
  double mu_rg, var_rg, mu_yb, var_yb;
  trimmed_stats(rg, mu_rg, var_rg);
  trimmed_stats(yb, mu_yb, var_yb);
  out.uicm = -0.0268 * std::sqrt(mu_rg * mu_rg + mu_yb * mu_yb) +
             0.1586 * std::sqrt(var_rg + var_yb);

  const double lam[3] = {0.299, 0.587, 0.114};
  for (int c = 0; c < 3; ++c) {
    std::vector<double> edge(n);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        size_t i = static_cast<size_t>(y) * w + x;
        edge[i] = sobel_mag_at(chan[c], h, w, y, x) * chan[c][i];
      }
    out.uism += lam[c] * eme(edge, h, w);
  }

  out.uiconm = log_amee(lum, h, w);
  return out;
}

double uiqm_from_components(double uicm, double uism, double uiconm) {
  return 0.0282 * uicm + 0.2953 * uism + 3.5753 * uiconm;
}

double uiqm(const Image& img) {
  UiqmComponents c = uiqm_components(img);
  return uiqm_from_components(c.uicm, c.uism, c.uiconm);
}

// ---------------------------------------------------------------------------
// UCIQE (chroma deviation, luminance contrast, saturation in CIELab)

namespace {

double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0 / 29.0;
}

// L, a, b scaled by 1/100 so the composite lands on a unit-ish range.
// Normalization uses the conversion matrix's own row sums as the white
// point so achromatic inputs land on a = b = 0.
void rgb_to_lab(double r, double g, double b, double& L, double& A, double& B) {
  double rl = srgb_to_linear(r), gl = srgb_to_linear(g), bl = srgb_to_linear(b);
  double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
  double xn = 0.4124564 + 0.3575761 + 0.1804375;
  double yn = 0.2126729 + 0.7151522 + 0.0721750;
  double zn = 0.0193339 + 0.1191920 + 0.9503041;
  double fx = lab_f(x / xn), fy = lab_f(y / yn), fz = lab_f(z / zn);
  L = (116.0 * fy - 16.0) / 100.0;
  A = 500.0 * (fx - fy) / 100.0;
  B = 200.0 * (fy - fz) / 100.0;
}

double percentile(std::vector<double>& sorted, double q) {
  double idx = q * (sorted.size() - 1);
  size_t lo = static_cast<size_t>(std::floor(idx));
  size_t hi = std::min(lo + 1, sorted.size() - 1);
  double f = idx - lo;
  return sorted[lo] * (1 - f) + sorted[hi] * f;
}

}  // namespace

UciqeComponents uciqe_components(const Image& img) {
  const size_t n = static_cast<size_t>(img.height) * img.width;
  std::vector<double> lum(n), chroma(n);
  double sat_acc = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      size_t i = static_cast<size_t>(y) * img.width + x;
      double L, A, B;
      rgb_to_lab(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2), L, A, B);
      lum[i] = L;
      chroma[i] = std::sqrt(A * A + B * B);
      double denom = std::sqrt(chroma[i] * chroma[i] + L * L);
      sat_acc += denom > 1e-12 ? chroma[i] / denom : 0.0;
    }

  UciqeComponents out;
  double mc = 0;
  for (double c : chroma) mc += c;
  mc /= n;
  double var = 0;
  for (double c : chroma) var += (c - mc) * (c - mc);
  out.sigma_chroma = std::sqrt(var / n);

  std::sort(lum.begin(), lum.end());
  out.contrast_l = percentile(lum, 0.99) - percentile(lum, 0.01);
  out.mean_saturation = sat_acc / n;
  return out;
}

double uciqe_from_components(double sigma_chroma, double contrast_l, double mean_saturation) {
  return 0.4680 * sigma_chroma + 0.2745 * contrast_l + 0.2576 * mean_saturation;
}

double uciqe(const Image& img) {
  UciqeComponents c = uciqe_components(img);
  return uciqe_from_components(c.sigma_chroma, c.contrast_l, c.mean_saturation);
}

MetricRow MetricReport::means() const {
  MetricRow m;
  m.name = "mean";
  if (rows.empty()) return m;
  m.weights.assign(static_cast<size_t>(n_weights), 0.0);
  for (const MetricRow& r : rows) {
    m.psnr += r.psnr;
    m.ssim += r.ssim;
    m.uiqm += r.uiqm;
    m.uciqe += r.uciqe;
    for (size_t i = 0; i < r.weights.size() && i < m.weights.size(); ++i)
      m.weights[i] += r.weights[i];
  }
  const double inv = 1.0 / rows.size();
  m.psnr *= inv;
  m.ssim *= inv;
  m.uiqm *= inv;
  m.uciqe *= inv;
  for (double& w : m.weights) w *= inv;
  return m;
}

}  // namespace uie
