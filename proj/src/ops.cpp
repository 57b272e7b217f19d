#include "uie/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

namespace uie {
namespace ops {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;
using EVec = Eigen::VectorXd;
using EArr = Eigen::Map<Eigen::ArrayXd>;
using ECArr = Eigen::Map<const Eigen::ArrayXd>;

namespace {

bool want_grad(Tape& t, std::initializer_list<Value> parents) {
  if (!t.grad_enabled()) return false;
  for (Value p : parents)
    if (t.requires_grad(p)) return true;
  return false;
}

ECArr arr(const Tensor& t) { return ECArr(t.data.data(), t.numel()); }
EArr arr(Tensor& t) { return EArr(t.data.data(), t.numel()); }

void accumulate(Tensor& dst, const Tensor& src) { arr(dst) += arr(src); }

const double kGrayR = 0.299, kGrayG = 0.587, kGrayB = 0.114;

}  // namespace

Value add(Tape& t, Value a, Value b) {
  require_same_shape(t.val(a), t.val(b), "add");
  Tensor out = Tensor::uninit(t.val(a).shape);
  arr(out) = arr(t.val(a)) + arr(t.val(b));
  if (!want_grad(t, {a, b})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [a, b](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) accumulate(tp.grad_of(a), g);
    if (tp.requires_grad(b)) accumulate(tp.grad_of(b), g);
  });
}

Value sub(Tape& t, Value a, Value b) {
  require_same_shape(t.val(a), t.val(b), "sub");
  Tensor out = Tensor::uninit(t.val(a).shape);
  arr(out) = arr(t.val(a)) - arr(t.val(b));
  if (!want_grad(t, {a, b})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [a, b](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) accumulate(tp.grad_of(a), g);
    if (tp.requires_grad(b)) arr(tp.grad_of(b)) -= arr(g);
  });
}

Value mul(Tape& t, Value a, Value b) {
  require_same_shape(t.val(a), t.val(b), "mul");
  Tensor out = Tensor::uninit(t.val(a).shape);
  arr(out) = arr(t.val(a)) * arr(t.val(b));
  if (!want_grad(t, {a, b})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [a, b](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) arr(tp.grad_of(a)) += arr(g) * arr(tp.val(b));
    if (tp.requires_grad(b)) arr(tp.grad_of(b)) += arr(g) * arr(tp.val(a));
  });
}

Value scale(Tape& t, Value a, double s) {
  Tensor out = Tensor::uninit(t.val(a).shape);
  arr(out) = arr(t.val(a)) * s;
  if (!want_grad(t, {a})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [a, s](Tape& tp, const Tensor& g) {
    arr(tp.grad_of(a)) += arr(g) * s;
  });
}

Value silu(Tape& t, Value a) {
  const Tensor& x = t.val(a);
  Tensor out = Tensor::uninit(x.shape);
  arr(out) = arr(x) / (1.0 + (-arr(x)).exp());
  if (!want_grad(t, {a})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [a](Tape& tp, const Tensor& g) {
    const Tensor& x2 = tp.val(a);
    auto s = 1.0 / (1.0 + (-arr(x2)).exp());
    arr(tp.grad_of(a)) += arr(g) * s * (1.0 + arr(x2) * (1.0 - s));
  });
}

Value relu(Tape& t, Value a) {
  const Tensor& x = t.val(a);
  Tensor out = Tensor::uninit(x.shape);
  arr(out) = arr(x).max(0.0);
  if (!want_grad(t, {a})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [a](Tape& tp, const Tensor& g) {
    const Tensor& x2 = tp.val(a);
    arr(tp.grad_of(a)) += (arr(x2) > 0.0).select(arr(g), 0.0);
  });
}

Value sigmoid(Tape& t, Value a) {
  const Tensor& x = t.val(a);
  Tensor out = Tensor::uninit(x.shape);
  arr(out) = 1.0 / (1.0 + (-arr(x)).exp());
  if (!want_grad(t, {a})) return t.make(std::move(out), false);
  Value o = t.make(std::move(out), true);
  // reads its own output value
  t.set_backprop(o, [a, o](Tape& tp, const Tensor& g) {
    auto y = arr(tp.val(o));
    arr(tp.grad_of(a)) += arr(g) * y * (1.0 - y);
  });
  return o;
}

Value mean_abs(Tape& t, Value a) {
  const Tensor& x = t.val(a);
  double n = static_cast<double>(x.numel());
  Tensor out = Tensor::scalar(arr(x).abs().sum() / n);
  if (!want_grad(t, {a})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [a, n](Tape& tp, const Tensor& g) {
    const Tensor& x2 = tp.val(a);
    double s = g[0] / n;
    arr(tp.grad_of(a)) += arr(x2).sign() * s;
  });
}

Value mean_sq(Tape& t, Value a) {
  const Tensor& x = t.val(a);
  double n = static_cast<double>(x.numel());
  Tensor out = Tensor::scalar(arr(x).square().sum() / n);
  if (!want_grad(t, {a})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [a, n](Tape& tp, const Tensor& g) {
    const Tensor& x2 = tp.val(a);
    double s = 2.0 * g[0] / n;
    arr(tp.grad_of(a)) += arr(x2) * s;
  });
}

Value sqrt_scalar(Tape& t, Value a) {
  const Tensor& x = t.val(a);
  if (x.numel() != 1) throw std::invalid_argument("sqrt_scalar: not a scalar");
  double y = std::sqrt(std::max(0.0, x[0]));
  Tensor out = Tensor::scalar(y);
  if (!want_grad(t, {a})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [a, y](Tape& tp, const Tensor& g) {
    // subgradient 0 at the origin
    if (y > 1e-150) tp.grad_of(a)[0] += g[0] * 0.5 / y;
  });
}

// ---------------------------------------------------------------------------
// convolution

namespace {

// The 3x3 (general k x k) convolution runs as one large GEMM per kernel tap
// over a shifted flat view of the input. Shifted flat indexing is exact for
// interior positions; positions whose reads cross an image edge (reflect
// padding, plus flat-index wraparound at row ends) are patched afterwards by
// per-position corrections. Border positions are O(k*(H+W)) so the
// correction cost is negligible next to the GEMMs.
struct ConvGeom {
  int h, w, cin, cout, k, half;
  long hw;

  // flat output range [pa, pb) covered by the big GEMM of tap (dy, dx)
  void tap_range(int dy, int dx, long& pa, long& pb) const {
    long y_lo = std::max(0, -dy), y_hi = h - std::max(0, dy);
    pa = y_lo * w + std::max(0, -dx);
    pb = y_hi * w - std::max(0, dx);
    if (pb < pa) pb = pa;
  }

  // positions within half a kernel of any edge
  template <typename F>
  void for_border(F&& f) const {
    for (int y = 0; y < h; ++y) {
      bool border_row = y < half || y >= h - half;
      for (int x = 0; x < w; ++x) {
        if (border_row || x < half || x >= w - half) f(y, x);
      }
    }
  }

  long flat(int y, int x) const { return static_cast<long>(y) * w + x; }
  long reflected(int y, int x, int dy, int dx) const {
    return flat(reflect_index(y + dy, h), reflect_index(x + dx, w));
  }
};

}  // namespace

Value conv2d(Tape& t, Value x, Value w, Value b, int ksize) {
  const Tensor& vx = t.val(x);
  const Tensor& vw = t.val(w);
  const Tensor& vb = t.val(b);
  if (vx.rank() != 3) throw std::invalid_argument("conv2d: input must be {H,W,C}");
  const int h = vx.dim(0), wd = vx.dim(1), cin = vx.dim(2);
  if (vw.rank() != 2 || vw.dim(0) != ksize * ksize * cin)
    throw std::invalid_argument("conv2d: weight shape mismatch, got " + vw.shape_str());
  const int cout = vw.dim(1);
  if (vb.numel() != cout) throw std::invalid_argument("conv2d: bias shape mismatch");

  const ConvGeom geo{h, wd, cin, cout, ksize, ksize / 2, static_cast<long>(h) * wd};
  Tensor out = Tensor::uninit({h, wd, cout});
  EMap om(out.data.data(), geo.hw, cout);
  ECMap bm(vb.data.data(), 1, cout);
  om.rowwise() = bm.row(0);

  if (ksize == 1) {
    ECMap xm(vx.data.data(), geo.hw, cin);
    ECMap wm(vw.data.data(), cin, cout);
    om.noalias() += xm * wm;
  } else {
    for (int dy = -geo.half; dy <= geo.half; ++dy)
      for (int dx = -geo.half; dx <= geo.half; ++dx) {
        const int tap = (dy + geo.half) * ksize + (dx + geo.half);
        ECMap wtap(vw.data.data() + static_cast<size_t>(tap) * cin * cout, cin, cout);
        long pa, pb;
        geo.tap_range(dy, dx, pa, pb);
        const long shift = static_cast<long>(dy) * wd + dx;
        if (pb > pa) {
          ECMap xs(vx.data.data() + (pa + shift) * cin, pb - pa, cin);
          om.middleRows(pa, pb - pa).noalias() += xs * wtap;
        }
        geo.for_border([&](int y, int xx) {
          const long p = geo.flat(y, xx);
          const long q_true = geo.reflected(y, xx, dy, dx);
          const bool covered = p >= pa && p < pb;
          const long q_gemm = p + shift;
          if (covered && q_gemm == q_true) return;
          ECMap xt(vx.data.data() + q_true * cin, 1, cin);
          if (covered) {
            ECMap xg(vx.data.data() + q_gemm * cin, 1, cin);
            om.row(p) += (xt - xg) * wtap;
          } else {
            om.row(p) += xt * wtap;
          }
        });
      }
  }

  if (!want_grad(t, {x, w, b})) return t.make(std::move(out), false);

  return t.make(std::move(out), true, [x, w, b, ksize, geo](Tape& tp, const Tensor& g) {
    const int cin = geo.cin, cout = geo.cout;
    ECMap gm(g.data.data(), geo.hw, cout);
    if (tp.requires_grad(b)) {
      EMap gbm(tp.grad_of(b).data.data(), 1, cout);
      gbm.row(0) += gm.colwise().sum();
    }
    const Tensor& vw2 = tp.val(w);
    const Tensor& vx2 = tp.val(x);
    if (ksize == 1) {
      if (tp.requires_grad(w)) {
        ECMap xm(vx2.data.data(), geo.hw, cin);
        EMap gw(tp.grad_of(w).data.data(), cin, cout);
        gw.noalias() += xm.transpose() * gm;
      }
      if (tp.requires_grad(x)) {
        ECMap wm2(vw2.data.data(), cin, cout);
        EMap gx(tp.grad_of(x).data.data(), geo.hw, cin);
        gx.noalias() += gm * wm2.transpose();
      }
      return;
    }
    const bool need_w = tp.requires_grad(w);
    const bool need_x = tp.requires_grad(x);
    for (int dy = -geo.half; dy <= geo.half; ++dy)
      for (int dx = -geo.half; dx <= geo.half; ++dx) {
        const int tap = (dy + geo.half) * ksize + (dx + geo.half);
        ECMap wtap(vw2.data.data() + static_cast<size_t>(tap) * cin * cout, cin, cout);
        long pa, pb;
        geo.tap_range(dy, dx, pa, pb);
        const long shift = static_cast<long>(dy) * geo.w + dx;
        if (pb > pa) {
          ECMap xs(vx2.data.data() + (pa + shift) * cin, pb - pa, cin);
          if (need_w) {
            EMap gw(tp.grad_of(w).data.data() + static_cast<size_t>(tap) * cin * cout,
                    cin, cout);
            gw.noalias() += xs.transpose() * gm.middleRows(pa, pb - pa);
          }
          if (need_x) {
            EMap gxs(tp.grad_of(x).data.data() + (pa + shift) * cin, pb - pa, cin);
            gxs.noalias() += gm.middleRows(pa, pb - pa) * wtap.transpose();
          }
        }
        geo.for_border([&](int y, int xx) {
          const long p = geo.flat(y, xx);
          const long q_true = geo.reflected(y, xx, dy, dx);
          const bool covered = p >= pa && p < pb;
          const long q_gemm = p + shift;
          if (covered && q_gemm == q_true) return;
          if (need_w) {
            EMap gw(tp.grad_of(w).data.data() + static_cast<size_t>(tap) * cin * cout,
                    cin, cout);
            ECMap xt(vx2.data.data() + q_true * cin, 1, cin);
            if (covered) {
              ECMap xg(vx2.data.data() + q_gemm * cin, 1, cin);
              gw.noalias() += (xt - xg).transpose() * gm.row(p);
            } else {
              gw.noalias() += xt.transpose() * gm.row(p);
            }
          }
          if (need_x) {
            Tensor& gx = tp.grad_of(x);
            EMap gq(gx.data.data() + q_true * cin, 1, cin);
            gq.noalias() += gm.row(p) * wtap.transpose();
            if (covered) {
              EMap gg(gx.data.data() + q_gemm * cin, 1, cin);
              gg.noalias() -= gm.row(p) * wtap.transpose();
            }
          }
        });
      }
  });
}

Value avg_pool2(Tape& t, Value x) {
  const Tensor& vx = t.val(x);
  const int h = vx.dim(0), w = vx.dim(1), c = vx.dim(2);
  if (h % 2 || w % 2) throw std::invalid_argument("avg_pool2: odd spatial dims");
  Tensor out = Tensor::uninit({h / 2, w / 2, c});
  for (int y = 0; y < h / 2; ++y)
    for (int xo = 0; xo < w / 2; ++xo)
      for (int k = 0; k < c; ++k)
        out.at(y, xo, k) = 0.25 * (vx.at(2 * y, 2 * xo, k) + vx.at(2 * y, 2 * xo + 1, k) +
                                   vx.at(2 * y + 1, 2 * xo, k) + vx.at(2 * y + 1, 2 * xo + 1, k));
  if (!want_grad(t, {x})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [x, h, w, c](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad_of(x);
    for (int y = 0; y < h / 2; ++y)
      for (int xo = 0; xo < w / 2; ++xo)
        for (int k = 0; k < c; ++k) {
          double v = 0.25 * g.at(y, xo, k);
          gx.at(2 * y, 2 * xo, k) += v;
          gx.at(2 * y, 2 * xo + 1, k) += v;
          gx.at(2 * y + 1, 2 * xo, k) += v;
          gx.at(2 * y + 1, 2 * xo + 1, k) += v;
        }
  });
}

namespace {

// half-pixel source coordinate and lerp weights for integer upsampling
inline void up_coords(int o, int factor, int n_in, int& i0, int& i1, double& w1) {
  double s = (o + 0.5) / factor - 0.5;
  if (s < 0) s = 0;
  double fl = std::floor(s);
  i0 = static_cast<int>(fl);
  i1 = std::min(i0 + 1, n_in - 1);
  if (i0 > n_in - 1) i0 = n_in - 1;
  w1 = s - fl;
}

}  // namespace

Value upsample_bilinear(Tape& t, Value x, int factor) {
  const Tensor& vx = t.val(x);
  const int h = vx.dim(0), w = vx.dim(1), c = vx.dim(2);
  const int ho = h * factor, wo = w * factor;
  Tensor out = Tensor::uninit({ho, wo, c});
  for (int y = 0; y < ho; ++y) {
    int y0, y1;
    double wy;
    up_coords(y, factor, h, y0, y1, wy);
    for (int xo = 0; xo < wo; ++xo) {
      int x0, x1;
      double wx;
      up_coords(xo, factor, w, x0, x1, wx);
      for (int k = 0; k < c; ++k) {
        double top = (1 - wx) * vx.at(y0, x0, k) + wx * vx.at(y0, x1, k);
        double bot = (1 - wx) * vx.at(y1, x0, k) + wx * vx.at(y1, x1, k);
        out.at(y, xo, k) = (1 - wy) * top + wy * bot;
      }
    }
  }
  if (!want_grad(t, {x})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [x, factor, h, w, c, ho, wo](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad_of(x);
    for (int y = 0; y < ho; ++y) {
      int y0, y1;
      double wy;
      up_coords(y, factor, h, y0, y1, wy);
      for (int xo = 0; xo < wo; ++xo) {
        int x0, x1;
        double wx;
        up_coords(xo, factor, w, x0, x1, wx);
        for (int k = 0; k < c; ++k) {
          double gv = g.at(y, xo, k);
          gx.at(y0, x0, k) += (1 - wy) * (1 - wx) * gv;
          gx.at(y0, x1, k) += (1 - wy) * wx * gv;
          gx.at(y1, x0, k) += wy * (1 - wx) * gv;
          gx.at(y1, x1, k) += wy * wx * gv;
        }
      }
    }
  });
}

Value global_avg_pool(Tape& t, Value x) {
  const Tensor& vx = t.val(x);
  const int h = vx.dim(0), w = vx.dim(1), c = vx.dim(2);
  Tensor out({c});
  const double inv = 1.0 / (static_cast<double>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int xo = 0; xo < w; ++xo)
      for (int k = 0; k < c; ++k) out[k] += vx.at(y, xo, k) * inv;
  if (!want_grad(t, {x})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [x, h, w, c, inv](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad_of(x);
    for (int y = 0; y < h; ++y)
      for (int xo = 0; xo < w; ++xo)
        for (int k = 0; k < c; ++k) gx.at(y, xo, k) += g[k] * inv;
  });
}

Value grayscale(Tape& t, Value img) {
  const Tensor& vx = t.val(img);
  if (vx.rank() != 3 || vx.dim(2) != 3)
    throw std::invalid_argument("grayscale: input must be {H,W,3}");
  const int h = vx.dim(0), w = vx.dim(1);
  Tensor out = Tensor::uninit({h, w, 1});
  for (int y = 0; y < h; ++y)
    for (int xo = 0; xo < w; ++xo)
      out.at(y, xo, 0) =
          kGrayR * vx.at(y, xo, 0) + kGrayG * vx.at(y, xo, 1) + kGrayB * vx.at(y, xo, 2);
  if (!want_grad(t, {img})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [img, h, w](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad_of(img);
    for (int y = 0; y < h; ++y)
      for (int xo = 0; xo < w; ++xo) {
        double gv = g.at(y, xo, 0);
        gx.at(y, xo, 0) += kGrayR * gv;
        gx.at(y, xo, 1) += kGrayG * gv;
        gx.at(y, xo, 2) += kGrayB * gv;
      }
  });
}

namespace {

// Sobel taps: channel 0 responds to horizontal change (d/dx), channel 1 to
// vertical change (d/dy).
const double kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
const double kSobelY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};

}  // namespace

Value sobel_pair(Tape& t, Value gray) {
  const Tensor& vx = t.val(gray);
  if (vx.rank() != 3 || vx.dim(2) != 1)
    throw std::invalid_argument("sobel_pair: input must be {H,W,1}");
  const int h = vx.dim(0), w = vx.dim(1);
  Tensor out = Tensor::uninit({h, w, 2});
  for (int y = 0; y < h; ++y)
    for (int xo = 0; xo < w; ++xo) {
      auto v = [&](int dy, int dx) {
        return vx.at(reflect_index(y + dy, h), reflect_index(xo + dx, w), 0);
      };
      // evaluated as a difference of identically ordered sums so a constant
      // input cancels to exactly zero
      double right = v(-1, 1) + 2.0 * v(0, 1) + v(1, 1);
      double left = v(-1, -1) + 2.0 * v(0, -1) + v(1, -1);
      double bottom = v(1, -1) + 2.0 * v(1, 0) + v(1, 1);
      double top = v(-1, -1) + 2.0 * v(-1, 0) + v(-1, 1);
      out.at(y, xo, 0) = right - left;
      out.at(y, xo, 1) = bottom - top;
    }
  if (!want_grad(t, {gray})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [gray, h, w](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad_of(gray);
    for (int y = 0; y < h; ++y)
      for (int xo = 0; xo < w; ++xo) {
        double gsx = g.at(y, xo, 0), gsy = g.at(y, xo, 1);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int ry = reflect_index(y + dy, h), rx = reflect_index(xo + dx, w);
            gx.at(ry, rx, 0) +=
                kSobelX[dy + 1][dx + 1] * gsx + kSobelY[dy + 1][dx + 1] * gsy;
          }
      }
  });
}

Value concat_channels(Tape& t, Value a, Value b) {
  const Tensor& va = t.val(a);
  const Tensor& vb = t.val(b);
  if (va.rank() != 3 || vb.rank() != 3 || va.dim(0) != vb.dim(0) || va.dim(1) != vb.dim(1))
    throw std::invalid_argument("concat_channels: incompatible shapes " + va.shape_str() +
                                " vs " + vb.shape_str());
  const int h = va.dim(0), w = va.dim(1), ca = va.dim(2), cb = vb.dim(2);
  Tensor out({h, w, ca + cb});
  const long hw = static_cast<long>(h) * w;
  for (long p = 0; p < hw; ++p) {
    std::memcpy(&out.data[static_cast<size_t>(p) * (ca + cb)],
                &va.data[static_cast<size_t>(p) * ca], sizeof(double) * ca);
    std::memcpy(&out.data[static_cast<size_t>(p) * (ca + cb) + ca],
                &vb.data[static_cast<size_t>(p) * cb], sizeof(double) * cb);
  }
  if (!want_grad(t, {a, b})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [a, b, hw, ca, cb](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) {
      Tensor& ga = tp.grad_of(a);
      for (long p = 0; p < hw; ++p)
        for (int k = 0; k < ca; ++k)
          ga.data[static_cast<size_t>(p) * ca + k] +=
              g.data[static_cast<size_t>(p) * (ca + cb) + k];
    }
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad_of(b);
      for (long p = 0; p < hw; ++p)
        for (int k = 0; k < cb; ++k)
          gb.data[static_cast<size_t>(p) * cb + k] +=
              g.data[static_cast<size_t>(p) * (ca + cb) + ca + k];
    }
  });
}

Value channels_to_rows(Tape& t, Value x) {
  const Tensor& vx = t.val(x);
  if (vx.rank() != 3) throw std::invalid_argument("channels_to_rows: input must be {H,W,C}");
  const int h = vx.dim(0), w = vx.dim(1), c = vx.dim(2);
  const long hw = static_cast<long>(h) * w;
  Tensor out = Tensor::uninit({c, static_cast<int>(hw)});
  for (long p = 0; p < hw; ++p)
    for (int k = 0; k < c; ++k)
      out.data[static_cast<size_t>(k) * hw + p] = vx.data[static_cast<size_t>(p) * c + k];
  if (!want_grad(t, {x})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [x, hw, c](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad_of(x);
    for (long p = 0; p < hw; ++p)
      for (int k = 0; k < c; ++k)
        gx.data[static_cast<size_t>(p) * c + k] += g.data[static_cast<size_t>(k) * hw + p];
  });
}

Value gram(Tape& t, Value x) {
  const Tensor& vx = t.val(x);
  if (vx.rank() != 2) throw std::invalid_argument("gram: input must be a matrix");
  const int a = vx.dim(0), b = vx.dim(1);
  if (a < 1 || b < 1) throw std::invalid_argument("gram: empty input");
  Tensor out = Tensor::uninit({a, a});
  const double inv = 1.0 / (static_cast<double>(a) * b);
  ECMap xm(vx.data.data(), a, b);
  EMap om(out.data.data(), a, a);
  om.noalias() = xm * xm.transpose() * inv;
  if (!want_grad(t, {x})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [x, a, b, inv](Tape& tp, const Tensor& g) {
    const Tensor& vx2 = tp.val(x);
    ECMap xm2(vx2.data.data(), a, b);
    ECMap gm(g.data.data(), a, a);
    EMap gx(tp.grad_of(x).data.data(), a, b);
    gx.noalias() += inv * (gm + gm.transpose()) * xm2;
  });
}

Value matmul(Tape& t, Value a, Value b) {
  const Tensor& va = t.val(a);
  const Tensor& vb = t.val(b);
  if (va.rank() != 2 || vb.rank() != 2 || va.dim(1) != vb.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes " + va.shape_str() + " x " +
                                vb.shape_str());
  const int m = va.dim(0), k = va.dim(1), n = vb.dim(1);
  Tensor out = Tensor::uninit({m, n});
  ECMap am(va.data.data(), m, k), bm(vb.data.data(), k, n);
  EMap om(out.data.data(), m, n);
  om.noalias() = am * bm;
  if (!want_grad(t, {a, b})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [a, b, m, k, n](Tape& tp, const Tensor& g) {
    ECMap gm(g.data.data(), m, n);
    if (tp.requires_grad(a)) {
      ECMap bm2(tp.val(b).data.data(), k, n);
      EMap ga(tp.grad_of(a).data.data(), m, k);
      ga.noalias() += gm * bm2.transpose();
    }
    if (tp.requires_grad(b)) {
      ECMap am2(tp.val(a).data.data(), m, k);
      EMap gb(tp.grad_of(b).data.data(), k, n);
      gb.noalias() += am2.transpose() * gm;
    }
  });
}

Value transpose(Tape& t, Value a) {
  const Tensor& va = t.val(a);
  if (va.rank() != 2) throw std::invalid_argument("transpose: input must be a matrix");
  const int m = va.dim(0), n = va.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = va.at(i, j);
  if (!want_grad(t, {a})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [a, m, n](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_of(a);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) ga.at(i, j) += g.at(j, i);
  });
}

Value flatten(Tape& t, Value a) {
  const Tensor& va = t.val(a);
  Tensor out({static_cast<int>(va.numel())}, va.data);
  if (!want_grad(t, {a})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [a](Tape& tp, const Tensor& g) {
    accumulate(tp.grad_of(a), g);
  });
}

Value concat(Tape& t, Value a, Value b) {
  const Tensor& va = t.val(a);
  const Tensor& vb = t.val(b);
  if (va.rank() != 1 || vb.rank() != 1)
    throw std::invalid_argument("concat: vector inputs required");
  Tensor out({va.dim(0) + vb.dim(0)});
  std::copy(va.data.begin(), va.data.end(), out.data.begin());
  std::copy(vb.data.begin(), vb.data.end(), out.data.begin() + va.dim(0));
  if (!want_grad(t, {a, b})) return t.make(std::move(out), false);
  const int na = va.dim(0), nb = vb.dim(0);
  return t.make(std::move(out), true, [a, b, na, nb](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) {
      Tensor& ga = tp.grad_of(a);
      for (int i = 0; i < na; ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad_of(b);
      for (int i = 0; i < nb; ++i) gb[i] += g[na + i];
    }
  });
}

Value linear(Tape& t, Value w, Value x, Value b) {
  const Tensor& vw = t.val(w);
  const Tensor& vx = t.val(x);
  const Tensor& vb = t.val(b);
  if (vw.rank() != 2 || vx.rank() != 1 || vw.dim(1) != vx.dim(0) || vb.numel() != vw.dim(0))
    throw std::invalid_argument("linear: incompatible shapes");
  const int o = vw.dim(0), n = vw.dim(1);
  Tensor out({o});
  for (int i = 0; i < o; ++i) {
    double acc = vb[i];
    const double* wr = &vw.data[static_cast<size_t>(i) * n];
    for (int j = 0; j < n; ++j) acc += wr[j] * vx[j];
    out[i] = acc;
  }
  if (!want_grad(t, {w, x, b})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [w, x, b, o, n](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad_of(b);
      for (int i = 0; i < o; ++i) gb[i] += g[i];
    }
    if (tp.requires_grad(w)) {
      Tensor& gw = tp.grad_of(w);
      const Tensor& vx2 = tp.val(x);
      for (int i = 0; i < o; ++i)
        for (int j = 0; j < n; ++j) gw.data[static_cast<size_t>(i) * n + j] += g[i] * vx2[j];
    }
    if (tp.requires_grad(x)) {
      Tensor& gx = tp.grad_of(x);
      const Tensor& vw2 = tp.val(w);
      for (int i = 0; i < o; ++i)
        for (int j = 0; j < n; ++j) gx[j] += g[i] * vw2.data[static_cast<size_t>(i) * n + j];
    }
  });
}

Value detach(Tape& t, Value a) { return t.constant(t.val(a)); }

Value stack_scalars(Tape& t, const std::vector<Value>& xs) {
  if (xs.empty()) throw std::invalid_argument("stack_scalars: empty input");
  Tensor out({static_cast<int>(xs.size())});
  bool rg = false;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (t.val(xs[i]).numel() != 1)
      throw std::invalid_argument("stack_scalars: non-scalar element");
    out[i] = t.val(xs[i])[0];
    rg = rg || (t.grad_enabled() && t.requires_grad(xs[i]));
  }
  if (!rg) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [xs](Tape& tp, const Tensor& g) {
    for (size_t i = 0; i < xs.size(); ++i)
      if (tp.requires_grad(xs[i])) tp.grad_of(xs[i])[0] += g[i];
  });
}

Value softmax(Tape& t, Value logits) {
  const Tensor& z = t.val(logits);
  if (z.rank() != 1) throw std::invalid_argument("softmax: vector input required");
  for (double v : z.data)
    if (!std::isfinite(v)) throw std::invalid_argument("softmax: non-finite logit");
  Tensor out(z.shape);
  double mx = *std::max_element(z.data.begin(), z.data.end());
  double denom = 0;
  for (size_t i = 0; i < z.data.size(); ++i) {
    out[i] = std::exp(z[i] - mx);
    denom += out[i];
  }
  for (double& v : out.data) v /= denom;
  if (!want_grad(t, {logits})) return t.make(std::move(out), false);
  Value o = t.make(std::move(out), true);
  t.set_backprop(o, [logits, o](Tape& tp, const Tensor& g) {
    const Tensor& y = tp.val(o);
    double dot = 0;
    for (size_t i = 0; i < y.data.size(); ++i) dot += y[i] * g[i];
    Tensor& gz = tp.grad_of(logits);
    for (size_t i = 0; i < y.data.size(); ++i) gz[i] += y[i] * (g[i] - dot);
  });
  return o;
}

Value ce_with_logits(Tape& t, Value logits, int label) {
  const Tensor& z = t.val(logits);
  if (z.rank() != 1) throw std::invalid_argument("ce_with_logits: vector input required");
  if (label < 0 || label >= z.dim(0))
    throw std::invalid_argument("ce_with_logits: label out of range");
  for (double v : z.data)
    if (!std::isfinite(v)) throw std::invalid_argument("ce_with_logits: non-finite logit");
  double mx = *std::max_element(z.data.begin(), z.data.end());
  double denom = 0;
  for (double v : z.data) denom += std::exp(v - mx);
  double loss = std::log(denom) - (z[label] - mx);
  Tensor out = Tensor::scalar(loss);
  if (!want_grad(t, {logits})) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [logits, label, mx, denom](Tape& tp, const Tensor& g) {
    const Tensor& z2 = tp.val(logits);
    Tensor& gz = tp.grad_of(logits);
    for (size_t i = 0; i < z2.data.size(); ++i) {
      double p = std::exp(z2[i] - mx) / denom;
      gz[i] += g[0] * (p - (static_cast<int>(i) == label ? 1.0 : 0.0));
    }
  });
}

Value fuse(Tape& t, const std::vector<Value>& candidates, Value weights) {
  const Tensor& wv = t.val(weights);
  if (wv.rank() != 1 || static_cast<size_t>(wv.dim(0)) != candidates.size())
    throw std::invalid_argument("fuse: weight count does not match candidates");
  if (candidates.empty()) throw std::invalid_argument("fuse: no candidates");
  const Tensor& c0 = t.val(candidates[0]);
  for (const Value& c : candidates) require_same_shape(t.val(c), c0, "fuse");
  Tensor out(c0.shape);
  for (size_t k = 0; k < candidates.size(); ++k) {
    const Tensor& ck = t.val(candidates[k]);
    double wk = wv[k];
    for (size_t i = 0; i < out.data.size(); ++i) out[i] += wk * ck[i];
  }
  bool rg = t.grad_enabled() && t.requires_grad(weights);
  for (const Value& c : candidates) rg = rg || (t.grad_enabled() && t.requires_grad(c));
  if (!rg) return t.make(std::move(out), false);
  return t.make(std::move(out), true, [candidates, weights](Tape& tp, const Tensor& g) {
    const Tensor& wv2 = tp.val(weights);
    for (size_t k = 0; k < candidates.size(); ++k) {
      const Tensor& ck = tp.val(candidates[k]);
      if (tp.requires_grad(candidates[k])) {
        Tensor& gc = tp.grad_of(candidates[k]);
        for (size_t i = 0; i < g.data.size(); ++i) gc[i] += wv2[k] * g[i];
      }
      if (tp.requires_grad(weights)) {
        double dot = 0;
        for (size_t i = 0; i < g.data.size(); ++i) dot += ck[i] * g[i];
        tp.grad_of(weights)[k] += dot;
      }
    }
  });
}

}  // namespace ops
}  // namespace uie
