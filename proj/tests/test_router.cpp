#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "uie/routing.hpp"
#include "uie/trajectory.hpp"

using namespace uie;

namespace {

NetConfig toy_cfg() {
  NetConfig cfg;
  cfg.rep_channels = 5;
  cfg.style_channels = 6;
  cfg.style_downsample = 2;
  cfg.n_reb = cfg.n_seb = 2;
  cfg.proj_dim = 3;
  cfg.mlp_hidden = 7;
  return cfg;
}

void randomize_params(Network& net, uint64_t seed) {
  Rng rng(seed);
  for (auto& [name, p] : net.params()) {
    for (double& v : p.value.data) v = rng.uniform(-0.3, 0.3);
    snap_f32(p.value);
  }
}

Tensor dyadic_style(int h, int w, int c, Rng& rng) {
  Tensor t({h, w, c});
  for (double& v : t.data) v = static_cast<double>(static_cast<int>(rng.below(33)) - 16) / 16.0;
  return t;
}

}  // namespace

TEST_CASE("router logit is deterministic and spatially permutation invariant") {
  Network net(toy_cfg(), 7);
  randomize_params(net, 81);
  Rng rng(82);
  Tensor style = dyadic_style(4, 4, 6, rng);

  double l1 = net.router_logit_value(style);
  CHECK(l1 == net.router_logit_value(style));

  // permute spatial positions; Gram statistics and mean pooling see the
  // same multiset, so with exactly-representable inputs the logit matches
  std::vector<int> perm(16);
  for (int i = 0; i < 16; ++i) perm[i] = (5 * i + 2) % 16;
  Tensor sp({4, 4, 6});
  for (int p = 0; p < 16; ++p)
    for (int c = 0; c < 6; ++c)
      sp.data[static_cast<size_t>(p) * 6 + c] = style.data[static_cast<size_t>(perm[p]) * 6 + c];
  CHECK(net.router_logit_value(sp) == doctest::Approx(l1).epsilon(1e-12));
}

TEST_CASE("router logit gradient against central differences on a 2x2 toy style") {
  NetConfig cfg = toy_cfg();
  cfg.style_channels = 4;
  cfg.proj_dim = 2;
  Network net(cfg, 7);
  randomize_params(net, 83);
  Rng rng(84);
  Tensor style = oracle::random_tensor({2, 2, 4}, rng);

  Tape t(true);
  Value vs = t.leaf(style, true);
  auto [logit, hidden] = net.router_logit(t, vs);
  t.backward(logit);
  const Tensor& g = t.grad(vs);

  for (size_t i = 0; i < style.data.size(); ++i) {
    Tensor sp = style, sm = style;
    sp.data[i] += 1e-6;
    sm.data[i] -= 1e-6;
    double up = net.router_logit_value(sp), dn = net.router_logit_value(sm);
    double num = (up - dn) / 2e-6;
    if (std::abs(g[i]) < 1e-8 && std::abs(num) < 1e-6) continue;
    CHECK(oracle::rel_err(g[i], num) < 1e-3);
  }
}

TEST_CASE("route_weights is a numerically stable softmax") {
  auto w = route_weights({0.0, 0.0, 0.0});
  for (double v : w) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

  auto w2 = route_weights({std::log(2.0), 0.0, 0.0});
  CHECK(w2[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(w2[1] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(w2[2] == doctest::Approx(0.25).epsilon(1e-9));

  SUBCASE("matches the naive oracle and survives a +1000 shift") {
    Rng rng(85);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> z(5);
      for (double& v : z) v = rng.uniform(-4, 4);
      auto want = oracle::softmax_naive(z);
      auto got = route_weights(z);
      std::vector<double> shifted = z;
      for (double& v : shifted) v += 1000.0;
      auto got_shift = route_weights(shifted);
      double sum = 0;
      for (size_t i = 0; i < z.size(); ++i) {
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-6));
        CHECK(got_shift[i] == doctest::Approx(want[i]).epsilon(1e-6));
        CHECK(got[i] >= 0.0);
        sum += got[i];
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
      // argmax never moves under a constant shift
      CHECK(std::max_element(got.begin(), got.end()) - got.begin() ==
            std::max_element(got_shift.begin(), got_shift.end()) - got_shift.begin());
    }
  }

  SUBCASE("non-finite logits are rejected") {
    CHECK_THROWS(route_weights({0.0, std::nan("")}));
  }
}

TEST_CASE("fusion") {
  Rng rng(86);
  std::vector<Tensor> cands;
  for (int k = 0; k < 3; ++k) cands.push_back(oracle::random_tensor({3, 3, 2}, rng));

  SUBCASE("one-hot weight selects a candidate exactly") {
    Tensor got = fuse(cands, {0.0, 1.0, 0.0});
    CHECK(got.data == cands[1].data);
  }
  SUBCASE("constant candidates in closed form") {
    std::vector<Tensor> cc{Tensor({2, 2, 1}), Tensor::full({2, 2, 1}, 2.0)};
    Tensor got = fuse(cc, {0.5, 0.5});
    for (double v : got.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("random weights against the scalar loop") {
    auto w = route_weights({0.3, -0.2, 0.9});
    Tensor got = fuse(cands, w);
    for (size_t i = 0; i < got.data.size(); ++i) {
      double want = 0;
      for (int k = 0; k < 3; ++k) want += w[k] * cands[k].data[i];
      CHECK(got.data[i] == doctest::Approx(want).epsilon(1e-6));
      // convexity bound
      double lo = std::min({cands[0].data[i], cands[1].data[i], cands[2].data[i]});
      double hi = std::max({cands[0].data[i], cands[1].data[i], cands[2].data[i]});
      CHECK(got.data[i] >= lo - 1e-12);
      CHECK(got.data[i] <= hi + 1e-12);
    }
  }
  SUBCASE("count mismatch is rejected") {
    CHECK_THROWS(fuse(cands, {0.5, 0.5}));
  }
}

TEST_CASE("route_and_decode") {
  Network net(toy_cfg(), 7);
  Rng rng(87);
  Tensor rep0 = oracle::random_tensor({8, 8, 5}, rng);
  Tensor style0 = oracle::random_tensor({4, 4, 6}, rng);

  SUBCASE("identical states yield uniform weights") {
    // shared router parameters make equal styles score equal logits
    Trajectory traj;
    for (int k = 0; k <= 2; ++k) traj.states.push_back({k, rep0, style0});
    auto [rd, img] = route_and_decode(net, traj);
    for (double w : rd.weights) CHECK(w == doctest::Approx(1.0 / 3).epsilon(1e-9));
  }

  SUBCASE("deterministic and compositional") {
    randomize_params(net, 88);
    Trajectory traj = unroll(net, rep0, style0, 2);
    auto [rd1, img1] = route_and_decode(net, traj);
    auto [rd2, img2] = route_and_decode(net, traj);
    CHECK(img1.px == img2.px);
    CHECK(rd1.weights == rd2.weights);
    REQUIRE(rd1.pre_logits.size() == 3);

    // equals the composition of the public pieces
    std::vector<double> logits;
    std::vector<Tensor> reps;
    for (const TrajectoryState& st : traj.states) {
      logits.push_back(net.router_logit_value(st.style));
      reps.push_back(st.rep);
    }
    auto w = route_weights(logits);
    Image composed = net.decode_rep(fuse(reps, w));
    CHECK(composed.px == img1.px);

    double sum = 0;
    for (double v : rd1.weights) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("permuting states permutes logits identically") {
    randomize_params(net, 89);
    Trajectory traj = unroll(net, rep0, style0, 2);
    auto [rd, img] = route_and_decode(net, traj);
    Trajectory swapped = traj;
    std::swap(swapped.states[0], swapped.states[2]);
    auto [rd2, img2] = route_and_decode(net, swapped);
    CHECK(rd2.logits[0] == rd.logits[2]);
    CHECK(rd2.logits[2] == rd.logits[0]);
    CHECK(rd2.logits[1] == rd.logits[1]);
  }
}

namespace {

// Jacobi eigenvalue iteration for symmetric matrices; test-local oracle.
std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> m) {
  const size_t n = m.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i + 1; j < n; ++j) off += m[i][j] * m[i][j];
    if (off < 1e-24) break;
    for (size_t p = 0; p < n; ++p)
      for (size_t q = p + 1; q < n; ++q) {
        if (std::abs(m[p][q]) < 1e-18) continue;
        double theta = (m[q][q] - m[p][p]) / (2 * m[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1));
        double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (size_t k = 0; k < n; ++k) {
          double mkp = m[k][p], mkq = m[k][q];
          m[k][p] = c * mkp - s * mkq;
          m[k][q] = s * mkp + c * mkq;
        }
        for (size_t k = 0; k < n; ++k) {
          double mpk = m[p][k], mqk = m[q][k];
          m[p][k] = c * mpk - s * mqk;
          m[q][k] = s * mpk + c * mqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (size_t i = 0; i < n; ++i) ev[i] = m[i][i];
  std::sort(ev.begin(), ev.end(), std::greater<double>());
  return ev;
}

}  // namespace

TEST_CASE("routing vector projection") {
  SUBCASE("axis-aligned 2-D input is recovered up to the sign convention") {
    std::vector<Tensor> vs;
    // zero-mean and uncorrelated by construction
    double xs[] = {-3, -1, 1, 3}, ys[] = {0.5, -0.5, -0.5, 0.5};
    for (int i = 0; i < 4; ++i) vs.push_back(Tensor({2}, {xs[i], ys[i]}));
    auto pts = project_routing_vectors(vs);
    // first axis carries the larger variance (x); both axes sign-fixed positive
    for (int i = 0; i < 4; ++i) {
      CHECK(pts[i][0] == doctest::Approx(xs[i]).epsilon(1e-9));
      CHECK(pts[i][1] == doctest::Approx(ys[i]).epsilon(1e-9));
    }
  }

  SUBCASE("projections are centered") {
    Rng rng(90);
    std::vector<Tensor> vs;
    for (int i = 0; i < 10; ++i) vs.push_back(oracle::random_tensor({6}, rng));
    auto pts = project_routing_vectors(vs);
    double mx = 0, my = 0;
    for (auto& p : pts) {
      mx += p[0];
      my += p[1];
    }
    CHECK(std::abs(mx / 10) < 1e-9);
    CHECK(std::abs(my / 10) < 1e-9);
  }

  SUBCASE("explained variance matches the eigendecomposition oracle") {
    Rng rng(91);
    std::vector<Tensor> vs;
    for (int i = 0; i < 40; ++i) vs.push_back(oracle::random_tensor({8}, rng));
    auto pts = project_routing_vectors(vs);

    // covariance via plain loops
    std::vector<double> mean(8, 0.0);
    for (auto& v : vs)
      for (int j = 0; j < 8; ++j) mean[j] += v[j] / 40.0;
    std::vector<std::vector<double>> cov(8, std::vector<double>(8, 0.0));
    for (auto& v : vs)
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          cov[i][j] += (v[i] - mean[i]) * (v[j] - mean[j]) / 40.0;
    auto ev = jacobi_eigenvalues(cov);

    // total variance minus projected variance = tail eigenvalue sum
    double total = 0, projected = 0;
    for (int i = 0; i < 8; ++i) total += cov[i][i];
    for (auto& p : pts) projected += (p[0] * p[0] + p[1] * p[1]) / 40.0;
    double tail = 0;
    for (size_t i = 2; i < ev.size(); ++i) tail += ev[i];
    CHECK(total - projected == doctest::Approx(tail).epsilon(1e-6));
  }

  SUBCASE("degenerate inputs are rejected") {
    std::vector<Tensor> same(3, Tensor({4}, {1.0, 2.0, 3.0, 4.0}));
    CHECK_THROWS_AS(project_routing_vectors(same), DataError);
    CHECK_THROWS_AS(project_routing_vectors({Tensor({4}, {1.0, 2.0, 3.0, 4.0})}), DataError);
  }
}
