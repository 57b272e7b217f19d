#include "uie/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include "uie/image_io.hpp"

namespace fs = std::filesystem;

namespace uie {

namespace {

// stem -> filename, sorted by stem
std::map<std::string, std::string> list_rasters(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw DataError("missing directory " + dir.string());
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string fname = entry.path().filename().string();
    if (!has_raster_extension(fname)) continue;
    std::string stem = entry.path().stem().string();
    auto [it, inserted] = out.emplace(stem, fname);
    if (!inserted)
      throw DataError("ambiguous stem '" + stem + "' in " + dir.string() + ": " +
                      it->second + " and " + fname);
  }
  return out;
}

}  // namespace

Dataset load_dataset(const std::string& root, int res_h, int res_w) {
  const fs::path input_dir = fs::path(root) / "input";
  const fs::path gt_dir = fs::path(root) / "gt";
  auto inputs = list_rasters(input_dir);
  auto gts = list_rasters(gt_dir);

  std::string orphans;
  for (const auto& [stem, fname] : inputs)
    if (!gts.count(stem)) orphans += " input/" + fname;
  for (const auto& [stem, fname] : gts)
    if (!inputs.count(stem)) orphans += " gt/" + fname;
  if (!orphans.empty())
    throw DataError("unpaired files in " + root + ":" + orphans);
  if (inputs.empty()) throw DataError("empty dataset in " + root);

  Dataset ds;
  ds.pairs.reserve(inputs.size());
  for (const auto& [stem, fname] : inputs) {  // std::map iterates sorted
    SamplePair pair;
    pair.name = stem;
    pair.input = clamp01(resize_bilinear(load_image((input_dir / fname).string()), res_h, res_w));
    pair.target = clamp01(resize_bilinear(load_image((gt_dir / gts.at(stem)).string()), res_h, res_w));
    ds.pairs.push_back(std::move(pair));
  }
  return ds;
}

}  // namespace uie
