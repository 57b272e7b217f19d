#pragma once

#include <cstdint>
#include <vector>

#include "uie/error.hpp"
#include "uie/tensor.hpp"

namespace uie {

// RGB raster, values in [0,1], row-major {H, W, 3}.
struct Image {
  int height = 0, width = 0;
  DataVec px;

  Image() = default;
  Image(int h, int w) : height(h), width(w), px(static_cast<size_t>(h) * w * 3, 0.0) {
    if (h <= 0 || w <= 0) throw DataError("image: non-positive dimensions");
  }

  double& at(int y, int x, int c) {
    return px[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  double at(int y, int x, int c) const {
    return px[(static_cast<size_t>(y) * width + x) * 3 + c];
  }

  bool same_dims(const Image& o) const {
    return height == o.height && width == o.width;
  }
  long numel() const { return static_cast<long>(px.size()); }
};

// Integer raster as decoded from disk, before range normalization.
struct RawRaster {
  int height = 0, width = 0;
  int bit_depth = 8;  // 8 or 16
  std::vector<uint16_t> px;  // H*W*3
};

// v -> v / (2^bit_depth - 1); errors on out-of-range samples.
Image to_working_range(const RawRaster& raw);

Image clamp01(Image img);

// Fixed-kernel bilinear resampling, half-pixel centers, no antialiasing.
Image resize_bilinear(const Image& src, int out_h, int out_w);

Tensor tensor_from_image(const Image& img);
Image image_from_tensor(const Tensor& t);

double mean_channel(const Image& img, int c);

}  // namespace uie
