#include "uie/trajectory.hpp"

#include "uie/metrics.hpp"

namespace uie {

std::vector<std::pair<Value, Value>> unroll(Tape& t, const Network& net, Value rep0,
                                            Value style0, int depth) {
  if (depth < 1) throw ConfigError("unroll: depth must be >= 1");
  std::vector<std::pair<Value, Value>> states;
  states.reserve(static_cast<size_t>(depth) + 1);
  states.emplace_back(rep0, style0);
  for (int k = 1; k <= depth; ++k)
    states.push_back(net.refine_step(t, states.back().first, states.back().second));
  return states;
}

Trajectory unroll(const Network& net, const Tensor& rep0, const Tensor& style0, int depth) {
  if (depth < 1) throw ConfigError("unroll: depth must be >= 1");
  Tape t(false);
  auto states = unroll(t, net, t.constant(rep0), t.constant(style0), depth);
  Trajectory out;
  for (int k = 0; k < static_cast<int>(states.size()); ++k)
    out.states.push_back({k, t.val(states[k].first), t.val(states[k].second)});
  return out;
}

std::vector<Image> cascade_images(const Network& net, const Image& i0, int depth) {
  if (depth < 1) throw ConfigError("cascade: depth must be >= 1");
  std::vector<Image> out;
  out.reserve(static_cast<size_t>(depth) + 1);
  out.push_back(i0);
  for (int k = 1; k <= depth; ++k) out.push_back(net.enhance_once(out.back()));
  return out;
}

PseudoLabel pseudo_label(const std::vector<Image>& candidates, const Image& igt) {
  if (candidates.empty()) throw DataError("pseudo_label: no candidates");
  PseudoLabel out;
  out.scores.reserve(candidates.size());
  for (const Image& c : candidates) out.scores.push_back(psnr(c, igt));
  out.kbar = 0;
  for (size_t k = 1; k < out.scores.size(); ++k)
    if (out.scores[k] > out.scores[out.kbar]) out.kbar = static_cast<int>(k);
  return out;
}

}  // namespace uie
