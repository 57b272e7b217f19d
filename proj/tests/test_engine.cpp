#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "uie/ops.hpp"
#include "uie/params.hpp"
#include "uie/tape.hpp"

using namespace uie;

namespace {

// finite-difference gradient of a scalar-valued graph w.r.t. one input
// tensor entry, rebuilt per evaluation
double fd_wrt_input(const std::function<double(const Tensor&)>& eval, Tensor x, size_t idx,
                    double h = 1e-5) {
  Tensor xp = x, xm = x;
  xp.data[idx] += h;
  xm.data[idx] -= h;
  return (eval(xp) - eval(xm)) / (2 * h);
}

void check_input_gradients(const std::function<Value(Tape&, Value)>& build, const Tensor& x,
                           double tol = 1e-3) {
  Tape t(true);
  Value vx = t.leaf(x, true);
  Value loss = build(t, vx);
  t.backward(loss);
  const Tensor& g = t.grad(vx);
  auto eval = [&](const Tensor& xin) {
    Tape t2(false);
    return t2.val(build(t2, t2.constant(xin)))[0];
  };
  for (size_t i = 0; i < x.data.size(); ++i) {
    double num = fd_wrt_input(eval, x, i);
    if (std::abs(g[i]) < 1e-8 && std::abs(num) < 1e-6) continue;
    CAPTURE(i);
    CHECK(oracle::rel_err(g[i], num) < tol);
  }
}

}  // namespace

TEST_CASE("conv2d matches the nested-loop oracle") {
  Rng rng(11);
  for (int k : {1, 3}) {
    Tensor x = oracle::random_tensor({6, 5, 3}, rng);
    Tensor w = oracle::random_tensor({k * k * 3, 4}, rng);
    Tensor b = oracle::random_tensor({4}, rng);
    Tape t(false);
    const Tensor& got =
        t.val(ops::conv2d(t, t.constant(x), t.constant(w), t.constant(b), k));
    Tensor want = oracle::conv2d_naive(x, w, b, k);
    REQUIRE(got.shape == want.shape);
    for (size_t i = 0; i < got.data.size(); ++i)
      CHECK(std::abs(got[i] - want[i]) < 1e-12);
  }
}

TEST_CASE("conv2d gradients match central differences") {
  Rng rng(12);
  Tensor x = oracle::random_tensor({4, 4, 2}, rng);
  Tensor w = oracle::random_tensor({9 * 2, 3}, rng);
  Tensor b = oracle::random_tensor({3}, rng);

  auto run = [&](const Tensor& xin, const Tensor& win, const Tensor& bin, Tape& t,
                 bool grad) {
    Value vx = t.leaf(xin, grad);
    Value vw = t.leaf(win, grad);
    Value vb = t.leaf(bin, grad);
    Value y = ops::conv2d(t, vx, vw, vb, 3);
    return std::tuple{ops::mean_sq(t, y), vx, vw, vb};
  };

  Tape t(true);
  auto [loss, vx, vw, vb] = run(x, w, b, t, true);
  t.backward(loss);

  auto eval = [&](const Tensor& xin, const Tensor& win, const Tensor& bin) {
    Tape t2(false);
    auto [l, a1, a2, a3] = run(xin, win, bin, t2, false);
    return t2.val(l)[0];
  };
  for (size_t i = 0; i < x.data.size(); ++i) {
    Tensor xp = x, xm = x;
    xp.data[i] += 1e-5;
    xm.data[i] -= 1e-5;
    double num = (eval(xp, w, b) - eval(xm, w, b)) / 2e-5;
    CHECK(oracle::rel_err(t.grad(vx)[i], num) < 1e-3);
  }
  for (size_t i = 0; i < w.data.size(); ++i) {
    Tensor wp = w, wm = w;
    wp.data[i] += 1e-5;
    wm.data[i] -= 1e-5;
    double num = (eval(x, wp, b) - eval(x, wm, b)) / 2e-5;
    CHECK(oracle::rel_err(t.grad(vw)[i], num) < 1e-3);
  }
  for (size_t i = 0; i < b.data.size(); ++i) {
    Tensor bp = b, bm = b;
    bp.data[i] += 1e-5;
    bm.data[i] -= 1e-5;
    double num = (eval(x, w, bp) - eval(x, w, bm)) / 2e-5;
    CHECK(oracle::rel_err(t.grad(vb)[i], num) < 1e-3);
  }
}

TEST_CASE("pointwise and pooling ops pass input gradient checks") {
  Rng rng(13);
  Tensor x = oracle::random_tensor({4, 4, 3}, rng);

  check_input_gradients(
      [](Tape& t, Value v) { return ops::mean_sq(t, ops::silu(t, v)); }, x);
  check_input_gradients(
      [](Tape& t, Value v) { return ops::mean_abs(t, ops::sigmoid(t, v)); }, x);
  check_input_gradients(
      [](Tape& t, Value v) { return ops::mean_sq(t, ops::avg_pool2(t, v)); }, x);
  check_input_gradients(
      [](Tape& t, Value v) { return ops::mean_sq(t, ops::upsample_bilinear(t, v, 2)); }, x);
  check_input_gradients(
      [](Tape& t, Value v) { return ops::mean_sq(t, ops::global_avg_pool(t, v)); }, x);
  check_input_gradients(
      [](Tape& t, Value v) { return ops::mean_sq(t, ops::grayscale(t, v)); }, x);
  check_input_gradients(
      [](Tape& t, Value v) {
        return ops::mean_sq(t, ops::gram(t, ops::channels_to_rows(t, v)));
      },
      x);
  check_input_gradients(
      [](Tape& t, Value v) {
        return ops::sqrt_scalar(t, ops::mean_sq(t, ops::sobel_pair(t, ops::grayscale(t, v))));
      },
      x);
}

TEST_CASE("matmul, linear and softmax gradients") {
  Rng rng(14);
  Tensor a = oracle::random_tensor({3, 4}, rng);
  Rng r2(99);
  Tensor bm = oracle::random_tensor({4, 2}, r2);
  check_input_gradients(
      [&](Tape& t, Value v) {
        return ops::mean_sq(t, ops::matmul(t, v, t.constant(bm)));
      },
      a);

  Tensor z = oracle::random_tensor({5}, rng);
  check_input_gradients(
      [](Tape& t, Value v) { return ops::mean_sq(t, ops::softmax(t, v)); }, z);
  check_input_gradients([](Tape& t, Value v) { return ops::ce_with_logits(t, v, 2); }, z);
}

TEST_CASE("weight sharing accumulates gradients across uses") {
  // y = w*x + w*w: dy/dw = x + 2w
  ParamStore ps;
  Param& w = ps.add("w", Tensor::scalar(0.5));
  Tape t(true);
  Value vw = t.param(w);
  Value vw2 = t.param(w);  // same node
  CHECK(vw.id == vw2.id);
  Value x = t.constant(Tensor::scalar(3.0));
  Value y = ops::add(t, ops::mul(t, vw, x), ops::mul(t, vw, vw));
  t.backward(y);
  CHECK(t.param_grad(w) != nullptr);
  CHECK((*t.param_grad(w))[0] == doctest::Approx(3.0 + 2 * 0.5));
}

TEST_CASE("fuse computes the convex combination and its gradients") {
  Rng rng(15);
  std::vector<Tensor> cands;
  for (int k = 0; k < 3; ++k) cands.push_back(oracle::random_tensor({2, 2, 2}, rng));
  Tensor w({3}, {0.2, 0.5, 0.3});

  Tape t(true);
  std::vector<Value> vc;
  for (auto& c : cands) vc.push_back(t.leaf(c, true));
  Value vw = t.leaf(w, true);
  Value fused = ops::fuse(t, vc, vw);

  // elementwise brute force
  for (size_t i = 0; i < t.val(fused).data.size(); ++i) {
    double want = 0;
    for (int k = 0; k < 3; ++k) want += w[k] * cands[k].data[i];
    CHECK(t.val(fused)[i] == doctest::Approx(want).epsilon(1e-12));
  }

  Value loss = ops::mean_sq(t, fused);
  t.backward(loss);
  auto eval = [&](const std::vector<Tensor>& cs, const Tensor& ws) {
    Tape t2(false);
    std::vector<Value> v2;
    for (auto& c : cs) v2.push_back(t2.constant(c));
    return t2.val(ops::mean_sq(t2, ops::fuse(t2, v2, t2.constant(ws))))[0];
  };
  for (int k = 0; k < 3; ++k) {
    Tensor wp = w, wm = w;
    wp.data[k] += 1e-6;
    wm.data[k] -= 1e-6;
    double num = (eval(cands, wp) - eval(cands, wm)) / 2e-6;
    CHECK(oracle::rel_err(t.grad(vw)[k], num) < 1e-3);
  }
}

TEST_CASE("adam with zero learning rate leaves parameters unchanged") {
  ParamStore ps;
  Param& p = ps.add("p", Tensor({3}, {0.1, -0.2, 0.3}));
  Tensor before = p.value;
  Adam adam({0.0});
  Tensor g({3}, {1.0, 2.0, 3.0});
  for (int s = 1; s <= 10; ++s) adam.update(p, g, s);
  CHECK(p.value.data == before.data);
}

TEST_CASE("parameters stay on the float32 grid after updates") {
  ParamStore ps;
  Param& p = ps.add("p", Tensor({2}, {0.1234567890123, -1.9876543210987}));
  for (double v : p.value.data) CHECK(v == snap_f32(v));
  Adam adam({1e-3});
  Tensor g({2}, {0.37, -0.11});
  adam.update(p, g, 1);
  for (double v : p.value.data) CHECK(v == snap_f32(v));
}

TEST_CASE("detach blocks gradient flow") {
  Tape t(true);
  Value x = t.leaf(Tensor::scalar(2.0), true);
  Value y = ops::mean_sq(t, ops::detach(t, x));
  t.backward(y);
  CHECK_FALSE(t.has_grad(x));
}
