#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace uie {

// Tensor storage allocator. 64-byte alignment keeps the linear-algebra
// kernels on one code path regardless of where a buffer lands, so repeated
// evaluation of the same graph is bitwise identical. Default-initializes
// (leaves doubles uninitialized) so hot op outputs that are fully
// overwritten skip a wasted memset.
template <class T>
struct uninit_allocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  uninit_allocator() = default;
  template <class U>
  uninit_allocator(const uninit_allocator<U>&) noexcept {}
  template <class U>
  struct rebind {
    using other = uninit_allocator<U>;
  };

  T* allocate(size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
  bool operator==(const uninit_allocator&) const { return true; }
  bool operator!=(const uninit_allocator&) const { return false; }
};

using DataVec = std::vector<double, uninit_allocator<double>>;

// Dense row-major tensor of doubles. Feature maps use {H, W, C} order,
// matrices {rows, cols}, vectors {n}, scalars {1}.
struct Tensor {
  std::vector<int> shape;
  DataVec data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0);
  }
  Tensor(std::vector<int> s, DataVec d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != static_cast<size_t>(numel_of(shape)))
      throw std::invalid_argument("tensor: data size does not match shape");
  }
  Tensor(std::vector<int> s, std::initializer_list<double> d)
      : shape(std::move(s)), data(d.begin(), d.end()) {
    if (data.size() != static_cast<size_t>(numel_of(shape)))
      throw std::invalid_argument("tensor: data size does not match shape");
  }

  // allocated but not zero-filled; every element must be written
  static Tensor uninit(std::vector<int> s) {
    Tensor t;
    long n = numel_of(s);
    t.shape = std::move(s);
    t.data.resize(static_cast<size_t>(n));
    return t;
  }

  static long numel_of(const std::vector<int>& s) {
    long n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("tensor: non-positive dim");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  long numel() const { return static_cast<long>(data.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  // {H, W, C} accessors
  double& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * shape[1] + x) * shape[2] + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * shape[1] + x) * shape[2] + c];
  }
  // {rows, cols} accessors
  double& at(int r, int c) { return data[static_cast<size_t>(r) * shape[1] + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * shape[1] + c]; }

  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "{";
    for (size_t i = 0; i < shape.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "}";
  }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(where) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
}

inline bool all_finite(const Tensor& t) {
  for (double v : t.data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace uie
