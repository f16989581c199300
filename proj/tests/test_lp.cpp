#include <catch2/catch_amalgamated.hpp>

#include "ncb/lp.hpp"
#include "ncb/rng.hpp"
#include "ncb/testfn.hpp"

using namespace ncb;

namespace {
const ScalingProfile& profile() {
  static ScalingProfile p = ScalingProfile::make();
  return p;
}
TestFunction smooth_f() {
  TestFunctionSpec spec;
  spec.center = {0.4, -0.3, 0.2};
  spec.width = 1.6;
  spec.degree = 2;
  spec.seed = 31;
  return TestFunction(spec);
}
}  // namespace

TEST_CASE("profile normalization is v-independent and equals 1") {
  const auto& prof = profile();
  std::vector<double> vals;
  const LpQuad quad{};
  for (const Vec3& v : {Vec3{0, 0, 0}, Vec3{3, 0, 0}, Vec3{1, 2, -2}}) {
    // tangent-plane integral of phi(tau_hat_v u)
    double acc = 0;
    quad.for_each(prof, [&](const Vec3& u, double w) { acc += w * prof.value(tangent_tau_hat(v, u)); });
    vals.push_back(acc);
    CHECK(acc == Catch::Approx(1.0).margin(1e-6));
  }
  // isometry invariance: the quadrature value is v-independent to 1e-8
  for (double a : vals) CHECK(a == Catch::Approx(vals[0]).margin(1e-8));
}

TEST_CASE("zero input produces zero output at all levels") {
  auto zero = [](const Vec3&) { return 0.0; };
  for (int j : {0, 2, 4}) {
    const auto q = lp_point_q(j, zero, profile(), {0.5, 0, 0}, LpQuad{12, 6, 8}, true);
    CHECK(q.p == 0.0);
    CHECK(lp_deriv_norm(q, 1) == 0.0);
    CHECK(lp_deriv_norm(q, 2) == 0.0);
  }
}

TEST_CASE("P_j f converges to f as j grows") {
  const TestFunction f = smooth_f();
  const LpQuad quad{};
  VelocityGrid grid(5.0, 13);
  const auto nodes = ball_nodes(grid, 4.0);
  double prev = 1e100;
  for (int j = 0; j <= 4; ++j) {
    double err2 = 0;
    for (std::size_t i : nodes) {
      const Vec3 v = grid.node(i);
      const double d = lp_point(j, f, profile(), v, quad).p - f(v);
      err2 += grid.weight(i) * d * d;
    }
    CHECK(err2 < prev * 1.05);
    prev = err2;
  }
  CHECK(prev < 5e-6);
}

TEST_CASE("telescoping: sum of Q_j equals P_J") {
  const TestFunction f = smooth_f();
  const LpQuad quad{16, 6, 8};
  CounterRng rng{21, 0};
  const int J = 4;
  for (int i = 0; i < 20; ++i) {
    const Vec3 v = rng.normal3(i) * 0.8;
    double sum = 0;
    for (int j = 0; j <= J; ++j) sum += lp_point_q(j, f, profile(), v, quad).p;
    const double pj = lp_point(J, f, profile(), v, quad).p;
    CHECK(sum == Catch::Approx(pj).margin(1e-10));
  }
}

TEST_CASE("boundedness of P_j on weighted spaces") {
  // || P_j f ||_{L^p_beta} <= C || f ||_{L^p_beta} with C independent of j
  const TestFunction f = smooth_f();
  const LpQuad quad{24, 6, 10};
  VelocityGrid grid(6.0, 15);
  const auto nodes = ball_nodes(grid, 5.5);
  for (double beta : {0.0, 0.5}) {
    for (int p : {1, 2}) {
      double fnorm = 0;
      for (std::size_t i : nodes) {
        const Vec3 v = grid.node(i);
        const double w = grid.weight(i) * std::pow(1 + norm2(v), 0.5 * beta);
        fnorm += w * std::pow(std::abs(f(v)), p);
      }
      std::vector<double> ratios;
      for (int j = 0; j <= 4; ++j) {
        double pnorm = 0;
        for (std::size_t i : nodes) {
          const Vec3 v = grid.node(i);
          const double w = grid.weight(i) * std::pow(1 + norm2(v), 0.5 * beta);
          pnorm += w * std::pow(std::abs(lp_point(j, f, profile(), v, quad).p), p);
        }
        ratios.push_back(std::pow(pnorm / fnorm, 1.0 / p));
      }
      const double lo = *std::min_element(ratios.begin(), ratios.end());
      const double hi = *std::max_element(ratios.begin(), ratios.end());
      CHECK(hi < 2.0);
      CHECK(hi / lo < 2.0);
    }
  }
}

TEST_CASE("Q_j(1) decays like 2^{-2j}") {
  auto one = [](const Vec3&) { return 1.0; };
  const LpQuad quad{};
  CounterRng rng{33, 1};
  std::vector<double> js, logs;
  for (int j = 1; j <= 5; ++j) {
    double m = 0;
    for (int i = 0; i < 12; ++i) {
      const Vec3 v = rng.normal3(100 * j + i) * 1.5;
      m = std::max(m, std::abs(lp_point_q(j, one, profile(), v, quad).p));
    }
    js.push_back(j);
    logs.push_back(std::log2(m));
  }
  CHECK(regression_slope(js, logs) <= -1.7);
}

TEST_CASE("Q_j concentrates at the scale of the input bump") {
  // a 2^{-j0}-scale feature should put its peak energy near level j0
  const int j0 = 2;
  TestFunctionSpec spec;
  spec.kind = TestFunctionKind::bump;
  spec.center = {0.5, 0, 0};
  spec.width = std::ldexp(1.0, -j0);
  const TestFunction f(spec);
  VelocityGrid grid(2.5, 21);
  const auto nodes = ball_nodes(grid, 2.0);
  const LpQuad quad{24, 6, 10};
  int best_j = -1;
  double best_e = -1;
  for (int j = 0; j <= 5; ++j) {
    double e = 0;
    for (std::size_t i : nodes) {
      const double q = lp_point_q(j, f, profile(), grid.node(i), quad).p;
      e += grid.weight(i) * q * q;
    }
    if (e > best_e) {
      best_e = e;
      best_j = j;
    }
  }
  CHECK(std::abs(best_j - j0) <= 1);
}

TEST_CASE("derivative levels scale like 2^{jk} on scale-matched probes") {
  // A C-infinity input has no 2^{-j}-scale content, so the dyadic-derivative
  // ratio saturates on the smooth suite. Probe each level with an oscillation
  // at its own scale, which is the regime the 2^{j}-per-derivative factor
  // describes.
  const Vec3 omega{0.531, 0.622, 0.575};
  VelocityGrid grid(4.0, 13);
  const auto nodes = ball_nodes(grid, 3.5);
  const LpQuad quad{};
  std::vector<double> js, r1, r2;
  for (int j = 2; j <= 6; ++j) {
    const double freq = std::ldexp(1.0, j);
    auto probe = [&](const Vec3& v) {
      return std::exp(-0.5 * norm2(v)) * std::cos(freq * dot(omega, v));
    };
    double e0 = 0, e1 = 0, e2 = 0;
    for (std::size_t i : nodes) {
      const auto q = lp_point_q(j, probe, profile(), grid.node(i), quad, true);
      const double w = grid.weight(i);
      e0 += w * q.p * q.p;
      e1 += w * lp_deriv_norm(q, 1) * lp_deriv_norm(q, 1);
      e2 += w * lp_deriv_norm(q, 2) * lp_deriv_norm(q, 2);
    }
    js.push_back(j);
    r1.push_back(0.5 * std::log2(e1 / e0));
    r2.push_back(0.5 * std::log2(e2 / e0));
  }
  CHECK(std::abs(regression_slope(js, r1) - 1.0) < 0.2);
  CHECK(std::abs(regression_slope(js, r2) - 2.0) < 0.3);
}

TEST_CASE("expansion audit (asympt)") {
  CounterRng rng{44, 2};
  std::vector<double> js, logs;
  for (int j = 1; j <= 6; ++j) {
    double m = 0;
    for (int i = 0; i < 24; ++i) {
      Vec3 v = rng.normal3(100 + i) * 1.2;
      Vec3 u = rng.normal3(500 + i);
      u = u / norm(u) * rng.uniform(1000 + i, 0.1, 0.95);
      m = std::max(m, std::abs(lp_expansion_residual(profile(), j, v, u)));
    }
    js.push_back(j);
    logs.push_back(std::log2(std::max(m, 1e-300)));
  }
  CHECK(regression_slope(js, logs) <= -1.8);
}

TEST_CASE("moment cancellation audit (intest)") {
  // per-point decay of the kernel moment residual; the envelope constant
  // varies with v, so the slope is measured point by point
  const double gamma2s = 0.5;
  CounterRng rng{55, 3};
  for (double beta : {0.0, 1.0, gamma2s}) {
    for (int i = 0; i < 5; ++i) {
      Vec3 v = rng.normal3(i) * 0.6;
      if (norm(v) > 2.0) v = v * (2.0 / norm(v));
      std::vector<double> js, logs;
      for (int j = 1; j <= 5; ++j) {
        const double res = std::abs(lp_moment_residual(profile(), j, v, beta, LpQuad{}));
        js.push_back(j);
        logs.push_back(std::log2(std::max(res, 1e-300)));
      }
      CHECK(regression_slope(js, logs) <= -1.8);
    }
  }
}

TEST_CASE("grid-backed projection and under-resolution error") {
  auto grid = std::make_shared<VelocityGrid>(4.0, 33);  // h = 0.25
  const TestFunction f = smooth_f();
  const GridFunction fg = f.sample(grid);

  const GridFunction p0 = project_p(0, fg, profile(), LpQuad{12, 6, 8});
  const GridFunction q0 = project_q(0, fg, profile(), LpQuad{12, 6, 8});
  double worst = 0;
  for (std::size_t i = 0; i < grid->size(); ++i) worst = std::max(worst, std::abs(p0[i] - q0[i]));
  CHECK(worst == 0.0);  // Q_0 = P_0

  CHECK_THROWS_AS(project_p(3, fg, profile(), LpQuad{12, 6, 8}), InvalidInput);  // 2^-3 < 2h
}
