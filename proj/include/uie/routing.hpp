#pragma once

#include <array>
#include <utility>
#include <vector>

#include "uie/network.hpp"
#include "uie/trajectory.hpp"

namespace uie {

// Per-image routing outcome over the K+1 candidate states.
struct RoutingDecision {
  std::vector<double> logits;
  std::vector<double> weights;        // softmax simplex
  Tensor fused;                       // weighted representation
  std::vector<Tensor> pre_logits;     // router hidden vectors, one per state
};

// numerically stable softmax; errors on non-finite logits
std::vector<double> route_weights(const std::vector<double>& logits);

// elementwise sum of w_k * candidate_k; lengths and shapes must agree
Tensor fuse(const std::vector<Tensor>& candidates, const std::vector<double>& weights);

// Evaluates the shared router on every state's style feature, fuses the
// representations and decodes the result.
std::pair<RoutingDecision, Image> route_and_decode(const Network& net,
                                                   const Trajectory& trajectory);

// PCA projection onto the two leading components, ordered by descending
// variance; each axis is flipped so its largest-magnitude coordinate is
// positive. Projected points are centered. Errors when fewer than two
// vectors are given or the covariance is degenerate (all vectors equal).
std::vector<std::array<double, 2>> project_routing_vectors(
    const std::vector<Tensor>& vectors);

}  // namespace uie
