#include <catch2/catch_amalgamated.hpp>

#include "ncb/geometry.hpp"
#include "ncb/rng.hpp"

using namespace ncb;

namespace {
Vec3 random_ball(const CounterRng& rng, std::uint64_t ctr, double radius) {
  Vec3 v = rng.normal3(ctr);
  return v * (radius / 4.0);
}
}  // namespace

TEST_CASE("lift maps v to (v, |v|^2/2)") {
  const Vec4 a = lift({0, 0, 0});
  CHECK(a.w == 0.0);
  const Vec4 b = lift({1, 0, 0});
  CHECK(b.x == 1.0);
  CHECK(b.w == Catch::Approx(0.5));
  CHECK(lift({1, 2, 2}).w == Catch::Approx(4.5));
}

TEST_CASE("tangent map limits and orthogonal case") {
  const Vec3 u{0.3, -1.2, 0.7};
  CHECK(norm(tangent_tau({0, 0, 0}, u) - u) == 0.0);

  // <v,u> = 0: correction vanishes and the lifted fourth component is 0
  const Vec3 v{2, 0, 0};
  const Vec3 w{0, 1.5, -0.25};
  CHECK(norm(tangent_tau(v, w) - w) < 1e-15);
  CHECK(std::abs(tangent_tau_hat(v, w).w) < 1e-15);
}

TEST_CASE("tau_hat is an isometry (property, 1e4 samples)") {
  CounterRng rng{2024, 1};
  double worst = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const Vec3 v = random_ball(rng, 2 * i, 10);
    const Vec3 u = random_ball(rng, 2 * i + 1, 6);
    const double lhs = norm(tangent_tau_hat(v, u));
    worst = std::max(worst, std::abs(lhs - norm(u)) / std::max(norm(u), 1e-30));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("lifted difference identity") {
  // Exact form: lift(v + tau_v u) = lift(v) + tau_hat_v u + |tau_v u|^2/2 e4.
  // (The |u|^2/2 variant agrees only to second order in the step; that
  // asymptotic version is exercised by the expansion audit in test_lp.)
  CounterRng rng{77, 2};
  for (std::uint64_t i = 0; i < 200; ++i) {
    const Vec3 v = random_ball(rng, 2 * i, 8);
    const Vec3 u = random_ball(rng, 2 * i + 1, 4);
    const Vec4 lhs = lift(v + tangent_tau(v, u));
    Vec4 rhs = lift(v) + tangent_tau_hat(v, u);
    rhs.w += 0.5 * norm2(tangent_tau(v, u));
    CHECK(norm(lhs - rhs) < 1e-12 * (1 + norm(lhs)));
  }
}

TEST_CASE("post_collision conserves momentum and energy (1e4 samples)") {
  CounterRng rng{5150, 3};
  double worst_e = 0, worst_p = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const Vec3 v = random_ball(rng, 3 * i, 10);
    const Vec3 vs = random_ball(rng, 3 * i + 1, 10);
    Vec3 sigma = rng.normal3(3 * i + 2);
    sigma = sigma / norm(sigma);
    const auto [vp, vsp] = post_collision(v, vs, sigma);
    const double scale = 1 + norm2(v) + norm2(vs);
    worst_p = std::max(worst_p, norm((v + vs) - (vp + vsp)) / std::sqrt(scale));
    worst_e = std::max(worst_e,
                       std::abs(norm2(v) + norm2(vs) - norm2(vp) - norm2(vsp)) / scale);
  }
  CHECK(worst_p < 1e-12);
  CHECK(worst_e < 1e-12);
}

TEST_CASE("post_collision identity cases and bad sigma") {
  const Vec3 v{1, 2, 3}, vs{-1, 0, 2};
  const Vec3 k = (v - vs) / norm(v - vs);
  const auto [vp, vsp] = post_collision(v, vs, k);
  CHECK(norm(vp - v) < 1e-14);
  CHECK(norm(vsp - vs) < 1e-14);

  const auto same = post_collision(v, v, {0, 0, 1});
  CHECK(norm(same.v_prime - v) == 0.0);

  CHECK_THROWS_AS(post_collision(v, vs, {0.5, 0, 0}), InvalidInput);
}

TEST_CASE("deviation relation identity (1e4 samples)") {
  CounterRng rng{8071, 4};
  double worst = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const Vec3 v = random_ball(rng, 3 * i, 8);
    Vec3 vs = random_ball(rng, 3 * i + 1, 8);
    if (norm(v - vs) < 1e-8) vs.x += 1.0;
    Vec3 sigma = rng.normal3(3 * i + 2);
    sigma = sigma / norm(sigma);
    const auto rel = deviation_relation(v, vs, sigma);
    worst = std::max(worst, std::abs(rel.identity_residual) / (1 + norm2(v - vs)));
  }
  CHECK(worst < 1e-12);

  const Vec3 v{1, 1, 0}, vs{0, 0, 0};
  const Vec3 k = (v - vs) / norm(v - vs);
  CHECK(deviation_relation(v, vs, k).displacement_norm < 1e-12);
  CHECK_THROWS_AS(deviation_relation(v, v, k), InvalidInput);

  // cos theta = 0 -> |v-v'|^2 = |v-v_*|^2 / 2
  Vec3 e1, e2;
  orthonormal_frame(k, e1, e2);
  const auto mid = deviation_relation(v, vs, e1);
  CHECK(mid.displacement_norm * mid.displacement_norm ==
        Catch::Approx(0.5 * norm2(v - vs)).epsilon(1e-12));
}

TEST_CASE("carleman plane construction") {
  const auto plane = carleman_plane({1, 0, 0}, {0, 0, 0});
  CHECK(norm(plane.normal - Vec3{1, 0, 0}) < 1e-15);
  CHECK(plane.point(2.0, 0.7).x == Catch::Approx(1.0));

  CounterRng rng{99, 5};
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Vec3 a = random_ball(rng, 3 * i, 6);
    Vec3 b = random_ball(rng, 3 * i + 1, 6);
    if (norm(a - b) < 1e-8) b.z += 2.0;
    const auto pl = carleman_plane(a, b);
    CHECK(std::abs(dot(pl.axis1, pl.axis2)) < 1e-12);
    CHECK(std::abs(norm(pl.axis1) - 1) < 1e-12);
    CHECK(std::abs(norm(pl.axis2) - 1) < 1e-12);
    const Vec3 p = pl.point(rng.uniform(7 * i, 0.0, 5.0), rng.uniform(7 * i + 1, 0.0, 2 * pi));
    CHECK(std::abs(dot(p - pl.base_point, pl.normal)) < 1e-12 * (1 + norm(p)));
  }
  CHECK_THROWS_AS(carleman_plane({1, 1, 1}, {1, 1, 1}), InvalidInput);
}

TEST_CASE("interpolation jacobian") {
  CHECK(interp_jacobian(0.0, -0.3) == Catch::Approx(1.0));
  CHECK(interp_jacobian(1.0, 1.0) == Catch::Approx(0.25));
  CHECK_THROWS_AS(interp_jacobian(-0.1, 0.0), InvalidInput);
  CHECK_THROWS_AS(interp_jacobian(0.5, 1.5), InvalidInput);

  // bounded below by 1/8 on cos_dev >= 0
  double worst = 1e9;
  for (int it = 0; it <= 100; ++it)
    for (int ic = 0; ic <= 100; ++ic)
      worst = std::min(worst, interp_jacobian(it / 100.0, ic / 100.0));
  CHECK(worst >= 0.125 - 1e-12);
}
