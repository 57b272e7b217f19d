#pragma once

#include <utility>
#include <vector>

#include "uie/network.hpp"

namespace uie {

struct TrajectoryState {
  int k = 0;
  Tensor rep;
  Tensor style;
};

// Ordered candidate states (rep_k, style_k) for k = 0..K, state 0 being the
// encoder output verbatim.
struct Trajectory {
  std::vector<TrajectoryState> states;
  int depth() const { return static_cast<int>(states.size()) - 1; }
};

struct PseudoLabel {
  int kbar = 0;
  std::vector<double> scores;  // PSNR per candidate
};

// graph-level unroll used during training: states[0] = inputs verbatim,
// states[k] = refine_step(states[k-1])
std::vector<std::pair<Value, Value>> unroll(Tape& t, const Network& net, Value rep0,
                                            Value style0, int depth);

// value-level unroll on frozen weights
Trajectory unroll(const Network& net, const Tensor& rep0, const Tensor& style0, int depth);

// Image-space cascade: element 0 is the input verbatim, element k applies
// the full decode(refine(encode(.))) pass to element k-1. No gradients.
std::vector<Image> cascade_images(const Network& net, const Image& i0, int depth);

// argmax of PSNR against the reference, ties broken toward the smallest index
PseudoLabel pseudo_label(const std::vector<Image>& candidates, const Image& igt);

}  // namespace uie
