#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "uie/dataset.hpp"
#include "uie/image.hpp"

namespace uie {

// Spatially uniform attenuation/backscatter model: I = J*t + B*(1-t) + noise.
// Red transmission is suppressed fastest, mimicking wavelength-dependent
// absorption; severity 0 is the exact identity.
struct DegradationParams {
  std::array<double, 3> transmission{1.0, 1.0, 1.0};
  std::array<double, 3> backscatter{0.0, 0.0, 0.0};
  double severity = 0.0;
  double noise_sigma = 0.0;
  uint64_t seed = 0;

  void validate() const;
  static DegradationParams identity();
};

// Interpolated endpoints used by sample_params at severity 1.
inline constexpr std::array<double, 3> kTransmissionEnd{0.2, 0.55, 0.85};
inline constexpr std::array<double, 3> kBackscatterEnd{0.05, 0.25, 0.35};
inline constexpr double kNoiseSigmaEnd = 0.02;

DegradationParams sample_params(double severity, uint64_t seed);

Image degrade(const Image& clean, const DegradationParams& params);

// Procedural clean sources: colored gradients, checkerboards, Gaussian blobs.
Image procedural_clean(uint64_t seed, int height, int width);

// Ascending-severity tier names: mild/moderate/severe/extreme for up to four
// tiers, generic t<i> beyond that.
std::string tier_label(size_t rank, size_t n_tiers);

struct SyntheticPairInfo {
  std::string name;
  double tier = 0.0;
  std::string label;
};

struct SyntheticDataset {
  Dataset data;
  std::vector<SyntheticPairInfo> info;
};

// n degraded/clean pairs cycling through the severity tiers. When
// `clean_sources` is empty, procedural sources are generated at
// (res_h, res_w); otherwise sources are used round-robin.
SyntheticDataset make_synthetic_dataset(const std::vector<Image>& clean_sources, int n,
                                        const std::vector<double>& severity_tiers,
                                        uint64_t seed, int res_h, int res_w);

}  // namespace uie
