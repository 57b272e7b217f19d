#pragma once

#include <memory>
#include <string>

#include "uie/params.hpp"
#include "uie/tape.hpp"

namespace uie {

// Frozen feature map provider for the perceptual loss.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual Value features(Tape& t, Value image) const = 0;
  virtual std::string name() const = 0;
};

// Frozen random-weight three-stage convolutional pyramid with a fixed
// internal seed; the default, asset-free choice. `out_stage` selects which
// stage's feature map is returned (default: second).
class PyramidExtractor : public FeatureExtractor {
 public:
  explicit PyramidExtractor(int out_stage = 2);
  Value features(Tape& t, Value image) const override;
  std::string name() const override;

 private:
  int out_stage_;
  ParamStore params_;
};

// VGG-19-style extractor through its second stage, backed by an external
// weights asset (named float32 blocks). Construction fails with guidance to
// select the pyramid fallback when the asset is missing.
class VggExtractor : public FeatureExtractor {
 public:
  explicit VggExtractor(const std::string& weights_path);
  Value features(Tape& t, Value image) const override;
  std::string name() const override;

 private:
  ParamStore params_;
  std::string path_;
};

// "pyramid", "pyramid:<stage>" or "vgg19:<weights path>"
std::unique_ptr<FeatureExtractor> make_extractor(const std::string& spec);

}  // namespace uie
