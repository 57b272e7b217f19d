#include "uie/image.hpp"

#include <algorithm>
#include <cmath>

namespace uie {

Image to_working_range(const RawRaster& raw) {
  if (raw.bit_depth != 8 && raw.bit_depth != 16)
    throw DataError("to_working_range: bit depth must be 8 or 16, got " +
                    std::to_string(raw.bit_depth));
  const uint32_t peak = (1u << raw.bit_depth) - 1u;
  Image out(raw.height, raw.width);
  const double inv = 1.0 / static_cast<double>(peak);
  for (size_t i = 0; i < raw.px.size(); ++i) {
    if (raw.px[i] > peak)
      throw DataError("to_working_range: sample value " + std::to_string(raw.px[i]) +
                      " exceeds " + std::to_string(peak));
    out.px[i] = raw.px[i] * inv;
  }
  return out;
}

Image clamp01(Image img) {
  for (double& v : img.px) v = std::min(1.0, std::max(0.0, v));
  return img;
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw DataError("resize: non-positive target size");
  if (src.height == out_h && src.width == out_w) return src;
  Image dst(out_h, out_w);
  const double sy = static_cast<double>(src.height) / out_h;
  const double sx = static_cast<double>(src.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::max(0.0, std::min(fy, static_cast<double>(src.height - 1)));
    int y0 = static_cast<int>(std::floor(fy));
    int y1 = std::min(y0 + 1, src.height - 1);
    double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::max(0.0, std::min(fx, static_cast<double>(src.width - 1)));
      int x0 = static_cast<int>(std::floor(fx));
      int x1 = std::min(x0 + 1, src.width - 1);
      double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        double top = (1 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
        double bot = (1 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
        dst.at(y, x, c) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return dst;
}

Tensor tensor_from_image(const Image& img) {
  return Tensor({img.height, img.width, 3}, img.px);
}

Image image_from_tensor(const Tensor& t) {
  if (t.rank() != 3 || t.dim(2) != 3)
    throw DataError("image_from_tensor: tensor must be {H,W,3}, got " + t.shape_str());
  Image out(t.dim(0), t.dim(1));
  out.px = t.data;
  return out;
}

double mean_channel(const Image& img, int c) {
  double acc = 0;
  const long n = static_cast<long>(img.height) * img.width;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) acc += img.at(y, x, c);
  return acc / n;
}

}  // namespace uie
