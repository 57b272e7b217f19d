#include "uie/synth.hpp"

#include <algorithm>
#include <cmath>

#include "uie/rng.hpp"

namespace uie {

DegradationParams DegradationParams::identity() { return DegradationParams{}; }

void DegradationParams::validate() const {
  if (severity < 0.0 || severity > 1.0)
    throw ConfigError("degradation: severity must be in [0,1]");
  if (noise_sigma < 0.0) throw ConfigError("degradation: negative noise sigma");
  for (int c = 0; c < 3; ++c) {
    if (transmission[c] <= 0.0 || transmission[c] > 1.0)
      throw ConfigError("degradation: transmission out of (0,1]");
    if (backscatter[c] < 0.0 || backscatter[c] > 1.0)
      throw ConfigError("degradation: backscatter out of [0,1]");
  }
  if (severity == 0.0) {
    if (transmission != std::array<double, 3>{1.0, 1.0, 1.0} ||
        backscatter != std::array<double, 3>{0.0, 0.0, 0.0} || noise_sigma != 0.0)
      throw ConfigError("degradation: severity 0 must be the identity");
  } else if (transmission[0] > transmission[2]) {
    throw ConfigError("degradation: red transmission must not exceed blue");
  }
}

DegradationParams sample_params(double severity, uint64_t seed) {
  if (severity < 0.0 || severity > 1.0)
    throw ConfigError("sample_params: severity must be in [0,1]");
  DegradationParams p;
  p.severity = severity;
  p.seed = seed;
  if (severity == 0.0) return p;

  Rng rng(seed);
  auto jitter = [&rng]() { return rng.uniform(0.9, 1.1); };
  for (int c = 0; c < 3; ++c) {
    double t = 1.0 + (kTransmissionEnd[c] - 1.0) * severity;
    p.transmission[c] = std::clamp(t * jitter(), 0.01, 1.0);
  }
  // wavelength ordering survives the jitter
  p.transmission[0] = std::min(p.transmission[0], p.transmission[2]);
  for (int c = 0; c < 3; ++c)
    p.backscatter[c] = std::clamp(kBackscatterEnd[c] * severity * jitter(), 0.0, 1.0);
  p.noise_sigma = std::max(0.0, kNoiseSigmaEnd * severity * jitter());
  p.validate();
  return p;
}

Image degrade(const Image& clean, const DegradationParams& params) {
  params.validate();
  Image out(clean.height, clean.width);
  for (int y = 0; y < clean.height; ++y)
    for (int x = 0; x < clean.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = clean.at(y, x, c) * params.transmission[c] +
                          params.backscatter[c] * (1.0 - params.transmission[c]);
  if (params.noise_sigma > 0.0) {
    Rng rng(params.seed);
    for (double& v : out.px) v += rng.normal(0.0, params.noise_sigma);
  }
  return clamp01(std::move(out));
}

namespace {

Image gradient_source(Rng& rng, int h, int w) {
  double corner[4][3];
  for (auto& c : corner)
    for (double& v : c) v = rng.uniform(0.1, 1.0);
  Image img(h, w);
  for (int y = 0; y < h; ++y) {
    double fy = h > 1 ? static_cast<double>(y) / (h - 1) : 0.0;
    for (int x = 0; x < w; ++x) {
      double fx = w > 1 ? static_cast<double>(x) / (w - 1) : 0.0;
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = (1 - fy) * ((1 - fx) * corner[0][c] + fx * corner[1][c]) +
                          fy * ((1 - fx) * corner[2][c] + fx * corner[3][c]);
    }
  }
  return img;
}

Image checker_source(Rng& rng, int h, int w) {
  double a[3], b[3];
  for (int c = 0; c < 3; ++c) {
    a[c] = rng.uniform(0.05, 0.95);
    b[c] = rng.uniform(0.05, 0.95);
  }
  const int cells[] = {4, 8, 16};
  int cell = cells[rng.below(3)];
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool odd = ((y / cell) + (x / cell)) & 1;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = odd ? a[c] : b[c];
    }
  return img;
}

Image blob_source(Rng& rng, int h, int w) {
  Image img(h, w);
  double bg[3];
  for (int c = 0; c < 3; ++c) bg[c] = rng.uniform(0.1, 0.5);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = bg[c];
  int blobs = 3 + static_cast<int>(rng.below(4));
  for (int i = 0; i < blobs; ++i) {
    double cy = rng.uniform(0.0, h), cx = rng.uniform(0.0, w);
    double r = rng.uniform(0.08, 0.3) * std::min(h, w);
    double col[3];
    for (int c = 0; c < 3; ++c) col[c] = rng.uniform(0.2, 1.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        double g = std::exp(-d2 / (2.0 * r * r));
        for (int c = 0; c < 3; ++c)
          img.at(y, x, c) = img.at(y, x, c) * (1 - g) + col[c] * g;
      }
  }
  return clamp01(std::move(img));
}

}  // namespace

Image procedural_clean(uint64_t seed, int height, int width) {
  Rng rng(seed);
  switch (rng.below(3)) {
    case 0: return gradient_source(rng, height, width);
    case 1: return checker_source(rng, height, width);
    default: return blob_source(rng, height, width);
  }
}

std::string tier_label(size_t rank, size_t n_tiers) {
  static const char* kNames[] = {"mild", "moderate", "severe", "extreme"};
  if (n_tiers == 1) return "mild";
  if (n_tiers == 2) return rank == 0 ? "mild" : "severe";
  if (n_tiers <= 4) return kNames[rank + (4 - n_tiers) / 2];
  return "t" + std::to_string(rank);
}

SyntheticDataset make_synthetic_dataset(const std::vector<Image>& clean_sources, int n,
                                        const std::vector<double>& severity_tiers,
                                        uint64_t seed, int res_h, int res_w) {
  if (n < 1) throw ConfigError("make_synthetic_dataset: n must be >= 1");
  if (severity_tiers.empty())
    throw ConfigError("make_synthetic_dataset: at least one severity tier required");
  for (double t : severity_tiers)
    if (t < 0.0 || t > 1.0)
      throw ConfigError("make_synthetic_dataset: tier outside [0,1]");

  // label by ascending severity, preserving the caller's tier assignment order
  std::vector<double> sorted_tiers(severity_tiers);
  std::sort(sorted_tiers.begin(), sorted_tiers.end());
  sorted_tiers.erase(std::unique(sorted_tiers.begin(), sorted_tiers.end()),
                     sorted_tiers.end());
  auto label_of = [&](double tier) {
    size_t rank = static_cast<size_t>(
        std::lower_bound(sorted_tiers.begin(), sorted_tiers.end(), tier) -
        sorted_tiers.begin());
    return tier_label(rank, sorted_tiers.size());
  };

  SyntheticDataset out;
  out.data.split = Split::train;
  char base[32];
  for (int i = 0; i < n; ++i) {
    double tier = severity_tiers[i % severity_tiers.size()];
    uint64_t sample_seed = Rng::mix(seed, static_cast<uint64_t>(i));
    Image clean = clean_sources.empty()
                      ? procedural_clean(sample_seed, res_h, res_w)
                      : clamp01(resize_bilinear(clean_sources[i % clean_sources.size()],
                                                res_h, res_w));
    std::snprintf(base, sizeof(base), "img%03d", i);
    SyntheticPairInfo info;
    info.tier = tier;
    info.label = label_of(tier);
    info.name = std::string(base) + "__" + info.label;

    SamplePair pair;
    pair.name = info.name;
    pair.target = clean;
    pair.input = degrade(clean, sample_params(tier, Rng::mix(sample_seed, 1)));
    out.data.pairs.push_back(std::move(pair));
    out.info.push_back(std::move(info));
  }
  return out;
}

}  // namespace uie
