#pragma once

#include <string>

#include "uie/image.hpp"

namespace uie {

// Decodes a PNG or JPEG file into an integer raster (grayscale replicated,
// alpha dropped). Throws IoError naming the file on any failure.
RawRaster read_raster(const std::string& path);

// Convenience: decode and normalize to [0,1].
Image load_image(const std::string& path);

// 8-bit RGB PNG; values are clamped then rounded to v*255.
void save_png(const std::string& path, const Image& img);

bool has_raster_extension(const std::string& filename);

}  // namespace uie
