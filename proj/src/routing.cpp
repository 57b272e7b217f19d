#include "uie/routing.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "uie/ops.hpp"

namespace uie {

std::vector<double> route_weights(const std::vector<double>& logits) {
  if (logits.empty()) throw DataError("route_weights: empty logits");
  Tape t(false);
  Tensor z({static_cast<int>(logits.size())}, DataVec(logits.begin(), logits.end()));
  const Tensor& y = t.val(ops::softmax(t, t.constant(std::move(z))));
  return std::vector<double>(y.data.begin(), y.data.end());
}

Tensor fuse(const std::vector<Tensor>& candidates, const std::vector<double>& weights) {
  if (candidates.size() != weights.size())
    throw DataError("fuse: candidate/weight count mismatch");
  Tape t(false);
  std::vector<Value> cs;
  cs.reserve(candidates.size());
  for (const Tensor& c : candidates) cs.push_back(t.constant(c));
  Tensor w({static_cast<int>(weights.size())}, DataVec(weights.begin(), weights.end()));
  return t.val(ops::fuse(t, cs, t.constant(std::move(w))));
}

std::pair<RoutingDecision, Image> route_and_decode(const Network& net,
                                                   const Trajectory& trajectory) {
  if (trajectory.states.empty()) throw DataError("route_and_decode: empty trajectory");
  Tape t(false);
  RoutingDecision rd;
  std::vector<Value> logit_vals, cand_vals;
  for (const TrajectoryState& st : trajectory.states) {
    auto [logit, hidden] = net.router_logit(t, t.constant(st.style));
    logit_vals.push_back(logit);
    rd.logits.push_back(t.val(logit)[0]);
    rd.pre_logits.push_back(t.val(hidden));
    cand_vals.push_back(t.constant(st.rep));
  }
  Value w = ops::softmax(t, ops::stack_scalars(t, logit_vals));
  rd.weights.assign(t.val(w).data.begin(), t.val(w).data.end());
  Value fused = ops::fuse(t, cand_vals, w);
  rd.fused = t.val(fused);
  Image out = image_from_tensor(t.val(net.decode(t, fused)));
  return {std::move(rd), std::move(out)};
}

std::vector<std::array<double, 2>> project_routing_vectors(
    const std::vector<Tensor>& vectors) {
  if (vectors.size() < 2)
    throw DataError("project_routing_vectors: need at least two vectors");
  const long d = vectors[0].numel();
  for (const Tensor& v : vectors)
    if (v.numel() != d) throw DataError("project_routing_vectors: dimension mismatch");

  const long n = static_cast<long>(vectors.size());
  Eigen::MatrixXd x(n, d);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < d; ++j) x(i, j) = vectors[static_cast<size_t>(i)][static_cast<size_t>(j)];
  Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;

  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  if (cov.cwiseAbs().maxCoeff() < 1e-24)
    throw DataError("project_routing_vectors: degenerate covariance (identical vectors)");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success)
    throw DataError("project_routing_vectors: eigendecomposition failed");

  // eigenvalues ascend; take the last two, largest variance first
  std::vector<std::array<double, 2>> out(static_cast<size_t>(n));
  for (int comp = 0; comp < 2; ++comp) {
    Eigen::VectorXd axis = es.eigenvectors().col(d - 1 - comp);
    // deterministic sign: largest-magnitude coordinate positive
    long arg = 0;
    for (long j = 1; j < d; ++j)
      if (std::abs(axis(j)) > std::abs(axis(arg))) arg = j;
    if (axis(arg) < 0) axis = -axis;
    Eigen::VectorXd proj = x * axis;
    for (long i = 0; i < n; ++i) out[static_cast<size_t>(i)][comp] = proj(i);
  }
  return out;
}

}  // namespace uie
