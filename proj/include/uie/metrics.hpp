#pragma once

#include <string>
#include <vector>

#include "uie/image.hpp"

namespace uie {

// Peak-signal-to-noise ratio against unit dynamic range, capped at 100 dB
// for identical images so downstream argmax selection stays finite.
double psnr(const Image& a, const Image& b);
inline constexpr double kPsnrCap = 100.0;

// Luminance SSIM: 11x11 Gaussian window (sigma 1.5), C1=0.01^2, C2=0.03^2,
// mean over the valid (fully covered) region. Errors if the image is
// smaller than the window.
double ssim(const Image& a, const Image& b);

struct UiqmComponents {
  double uicm = 0, uism = 0, uiconm = 0;
};
UiqmComponents uiqm_components(const Image& img);
double uiqm_from_components(double uicm, double uism, double uiconm);
double uiqm(const Image& img);

struct UciqeComponents {
  double sigma_chroma = 0, contrast_l = 0, mean_saturation = 0;
};
UciqeComponents uciqe_components(const Image& img);
double uciqe_from_components(double sigma_chroma, double contrast_l, double mean_saturation);
double uciqe(const Image& img);

struct MetricRow {
  std::string name;
  double psnr = 0, ssim = 0, uiqm = 0, uciqe = 0;
  std::vector<double> weights;  // routing weights when available
};

struct MetricReport {
  std::vector<MetricRow> rows;
  int n_weights = 0;

  MetricRow means() const;  // arithmetic averages, name "mean"
};

}  // namespace uie
