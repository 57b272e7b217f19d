#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "uie/rng.hpp"
#include "uie/tensor.hpp"

namespace uie {

// Parameter values are kept on the float32 grid (checkpoints store raw
// float32 blocks, so snapping after init and after every update makes
// save/load lossless). Optimizer state stays in double.
inline double snap_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

inline void snap_f32(Tensor& t) {
  for (double& v : t.data) v = snap_f32(v);
}

struct Param {
  std::string name;
  Tensor value;
  bool trainable = true;
  // Adam state
  Tensor m, v;
};

class ParamStore {
 public:
  Param& add(const std::string& name, Tensor init, bool trainable = true) {
    snap_f32(init);
    auto [it, inserted] = params_.emplace(name, Param{name, std::move(init), trainable});
    if (!inserted) throw std::logic_error("param registered twice: " + name);
    return it->second;
  }

  Param& get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no such param: " + name);
    return it->second;
  }
  const Param& get(const std::string& name) const {
    return const_cast<ParamStore*>(this)->get(name);
  }
  bool has(const std::string& name) const { return params_.count(name) != 0; }

  // name-sorted, deterministic iteration
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  size_t count() const { return params_.size(); }

 private:
  std::map<std::string, Param> params_;
};

// helpers for common initializations
inline Tensor he_normal(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  double s = std::sqrt(2.0 / fan_in);
  for (double& v : t.data) v = rng.normal(0.0, s);
  return t;
}

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // One update for a single parameter given its gradient. `t` is the
  // 1-based global step used for bias correction.
  void update(Param& p, const Tensor& grad, long t, double lr_scale = 1.0) {
    require_same_shape(p.value, grad, "adam");
    if (p.m.data.empty()) {
      p.m = Tensor(p.value.shape);
      p.v = Tensor(p.value.shape);
    }
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (size_t i = 0; i < p.value.data.size(); ++i) {
      double g = grad[i];
      p.m[i] = b1 * p.m[i] + (1.0 - b1) * g;
      p.v[i] = b2 * p.v[i] + (1.0 - b2) * g * g;
      double mhat = p.m[i] / c1;
      double vhat = p.v[i] / c2;
      p.value[i] =
          snap_f32(p.value[i] - lr_scale * cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }

  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
};

}  // namespace uie
