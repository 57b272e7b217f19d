#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "uie/metrics.hpp"
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

Network random_net(uint64_t seed) {
  Network net(toy_cfg(), 7);
  Rng rng(seed);
  for (auto& [name, p] : net.params()) {
    for (double& v : p.value.data) v = rng.uniform(-0.25, 0.25);
    snap_f32(p.value);
  }
  return net;
}

}  // namespace

TEST_CASE("unrolling keeps state zero verbatim and yields depth+1 states") {
  Network net = random_net(101);
  Rng rng(102);
  Tensor rep0 = oracle::random_tensor({8, 8, 5}, rng);
  Tensor style0 = oracle::random_tensor({4, 4, 6}, rng);

  Trajectory traj = unroll(net, rep0, style0, 2);
  REQUIRE(traj.states.size() == 3);
  CHECK(traj.depth() == 2);
  CHECK(traj.states[0].rep.data == rep0.data);
  CHECK(traj.states[0].style.data == style0.data);
  for (int k = 0; k < 3; ++k) CHECK(traj.states[k].k == k);

  SUBCASE("states equal manual composition") {
    auto [r1, s1] = net.refine(rep0, style0);
    auto [r2, s2] = net.refine(r1, s1);
    CHECK(traj.states[1].rep.data == r1.data);
    CHECK(traj.states[2].rep.data == r2.data);
    CHECK(traj.states[2].style.data == s2.data);
  }

  SUBCASE("identical runs produce identical trajectories") {
    Trajectory again = unroll(net, rep0, style0, 2);
    for (int k = 0; k < 3; ++k) {
      CHECK(again.states[k].rep.data == traj.states[k].rep.data);
      CHECK(again.states[k].style.data == traj.states[k].style.data);
    }
  }

  SUBCASE("depth below one is rejected") {
    CHECK_THROWS_AS(unroll(net, rep0, style0, 0), ConfigError);
  }
}

TEST_CASE("image cascade") {
  Network net = random_net(103);
  Rng rng(104);
  Image i0 = oracle::random_image(8, 8, rng);

  auto cascade = cascade_images(net, i0, 2);
  REQUIRE(cascade.size() == 3);
  CHECK(cascade[0].px == i0.px);

  SUBCASE("element two equals the externally composed double pass") {
    Image manual = net.enhance_once(net.enhance_once(i0));
    CHECK(cascade[2].px == manual.px);
  }

  SUBCASE("first cascade element equals the decoded first trajectory state") {
    auto [rep0, style0] = net.encode_image(i0);
    Trajectory traj = unroll(net, rep0, style0, 2);
    Image decoded = net.decode_rep(traj.states[1].rep);
    CHECK(cascade[1].px == decoded.px);
  }
}

TEST_CASE("pseudo-label selection") {
  Rng rng(105);
  Image igt = oracle::random_image(12, 12, rng);

  SUBCASE("argmax with tie-break toward the smallest index") {
    // craft candidates with known ordering
    auto with_noise = [&](double sigma, uint64_t seed) {
      Image out = igt;
      Rng nrng(seed);
      for (double& v : out.px) v = std::clamp(v + nrng.normal(0.0, sigma), 0.0, 1.0);
      return out;
    };
    std::vector<Image> cands{with_noise(0.1, 1), igt, with_noise(0.05, 2)};
    PseudoLabel pl = pseudo_label(cands, igt);
    CHECK(pl.kbar == 1);
    REQUIRE(pl.scores.size() == 3);
    CHECK(pl.scores[1] == doctest::Approx(kPsnrCap));
    CHECK(pl.scores[0] < pl.scores[2]);

    // scores (10, 20, 15)-shaped ordering picks the middle
    CHECK(pl.scores[1] > pl.scores[2]);
  }

  SUBCASE("identical candidates give label zero") {
    std::vector<Image> cands{igt, igt, igt};
    CHECK(pseudo_label(cands, igt).kbar == 0);
  }

  SUBCASE("empty candidate list is rejected") {
    CHECK_THROWS_AS(pseudo_label({}, igt), DataError);
  }

  SUBCASE("label is invariant under monotone transforms of the scores") {
    std::vector<Image> cands{oracle::random_image(12, 12, rng),
                             oracle::random_image(12, 12, rng),
                             oracle::random_image(12, 12, rng)};
    PseudoLabel pl = pseudo_label(cands, igt);
    auto transformed = pl.scores;
    for (double& s : transformed) s = std::exp(0.3 * s) + 5.0;
    int arg = 0;
    for (size_t i = 1; i < transformed.size(); ++i)
      if (transformed[i] > transformed[arg]) arg = static_cast<int>(i);
    CHECK(arg == pl.kbar);
  }
}
