#include "uie/extractor.hpp"

#include <filesystem>
#include <fstream>

#include "uie/error.hpp"
#include "uie/ops.hpp"
#include "uie/rng.hpp"
#include "uie/serialize.hpp"

namespace uie {

namespace {

constexpr uint64_t kPyramidSeed = 0x9e1d2c3b4a5f6071ull;
const int kPyramidWidths[3] = {8, 16, 24};

}  // namespace

PyramidExtractor::PyramidExtractor(int out_stage) : out_stage_(out_stage) {
  if (out_stage < 1 || out_stage > 3)
    throw ConfigError("pyramid extractor: stage must be 1, 2 or 3");
  Rng rng(kPyramidSeed);
  int cin = 3;
  for (int s = 0; s < 3; ++s) {
    int cout = kPyramidWidths[s];
    params_.add("pyr.conv" + std::to_string(s + 1) + ".w",
                he_normal({9 * cin, cout}, 9 * cin, rng), /*trainable=*/false);
    params_.add("pyr.conv" + std::to_string(s + 1) + ".b", Tensor({cout}),
                /*trainable=*/false);
    cin = cout;
  }
}

Value PyramidExtractor::features(Tape& t, Value image) const {
  Value x = image;
  for (int s = 0; s < out_stage_; ++s) {
    if (s > 0) x = ops::avg_pool2(t, x);
    const std::string base = "pyr.conv" + std::to_string(s + 1);
    x = ops::silu(t, ops::conv2d(t, x, t.param(params_.get(base + ".w")),
                                 t.param(params_.get(base + ".b")), 3));
  }
  return x;
}

std::string PyramidExtractor::name() const {
  return "pyramid:" + std::to_string(out_stage_);
}

VggExtractor::VggExtractor(const std::string& weights_path) : path_(weights_path) {
  // through relu2_2: two 3->64 convs, pool, two 64->128 convs
  params_.add("vgg.conv1_1.w", Tensor({9 * 3, 64}), false);
  params_.add("vgg.conv1_1.b", Tensor({64}), false);
  params_.add("vgg.conv1_2.w", Tensor({9 * 64, 64}), false);
  params_.add("vgg.conv1_2.b", Tensor({64}), false);
  params_.add("vgg.conv2_1.w", Tensor({9 * 64, 128}), false);
  params_.add("vgg.conv2_1.b", Tensor({128}), false);
  params_.add("vgg.conv2_2.w", Tensor({9 * 128, 128}), false);
  params_.add("vgg.conv2_2.b", Tensor({128}), false);

  if (!std::filesystem::exists(weights_path))
    throw ConfigError("perceptual extractor weights not found at '" + weights_path +
                      "'; pass extractor=pyramid to use the built-in fallback, or "
                      "provide the weights asset");
  std::ifstream is(weights_path, std::ios::binary);
  if (!is) throw IoError("cannot open extractor weights: " + weights_path);
  read_param_blocks(is, params_);
}

Value VggExtractor::features(Tape& t, Value image) const {
  auto conv = [&](Value x, const std::string& base) {
    return ops::relu(t, ops::conv2d(t, x, t.param(params_.get(base + ".w")),
                                    t.param(params_.get(base + ".b")), 3));
  };
  Value x = conv(conv(image, "vgg.conv1_1"), "vgg.conv1_2");
  x = ops::avg_pool2(t, x);
  x = conv(conv(x, "vgg.conv2_1"), "vgg.conv2_2");
  return x;
}

std::string VggExtractor::name() const { return "vgg19"; }

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& spec) {
  if (spec == "pyramid" || spec.empty()) return std::make_unique<PyramidExtractor>();
  if (spec.rfind("pyramid:", 0) == 0)
    return std::make_unique<PyramidExtractor>(std::stoi(spec.substr(8)));
  if (spec.rfind("vgg19:", 0) == 0) return std::make_unique<VggExtractor>(spec.substr(6));
  if (spec == "vgg19")
    throw ConfigError("vgg19 extractor requires a weights path: vgg19:<path>; "
                      "or pass extractor=pyramid for the built-in fallback");
  throw ConfigError("unknown extractor '" + spec + "' (expected pyramid or vgg19:<path>)");
}

}  // namespace uie
