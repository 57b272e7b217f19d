#pragma once

#include <string>
#include <vector>

#include "uie/image.hpp"

namespace uie {

enum class Split { train, val, test };

struct SamplePair {
  Image input;
  Image target;
  std::string name;
};

struct Dataset {
  std::vector<SamplePair> pairs;
  Split split = Split::train;

  size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

// Loads a paired dataset from `root/{input,gt}` with exact stem matching
// (extensions may differ). Every image is resized to (res_h, res_w) and
// clamped to [0,1]; pairs come back sorted lexicographically by name.
Dataset load_dataset(const std::string& root, int res_h, int res_w);

}  // namespace uie
