#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ncb/geometry.hpp"
#include "ncb/grid.hpp"
#include "ncb/numerics.hpp"
#include "ncb/rng.hpp"
#include "ncb/testfn.hpp"

using namespace ncb;

namespace {
std::shared_ptr<const VelocityGrid> make_grid(double R, int n) {
  return std::make_shared<VelocityGrid>(R, n);
}
}  // namespace

TEST_CASE("trapezoid weights sum to the box volume") {
  auto g = make_grid(8.0, 25);
  double sum = 0;
  for (std::size_t i = 0; i < g->size(); ++i) sum += g->weight(i);
  CHECK(sum == Catch::Approx(std::pow(16.0, 3)).epsilon(1e-12));
}

TEST_CASE("maxwellian moments on the reference grid") {
  auto g = make_grid(8.0, 49);
  const GridFunction mu = maxwellian(g);
  CHECK(integrate(mu) == Catch::Approx(1.0).epsilon(1e-6));

  GridFunction vsq(g), v4(g);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double r2 = norm2(g->node(i));
    vsq[i] = r2 * mu[i];
    v4[i] = r2 * r2 * mu[i];
  }
  CHECK(integrate(vsq) == Catch::Approx(3.0).epsilon(1e-5));
  CHECK(integrate(v4) == Catch::Approx(15.0).epsilon(1e-4));

  CHECK(maxwellian_value({0, 0, 0}) == Catch::Approx(std::pow(2 * pi, -1.5)));

  const GridFunction M = sqrt_maxwellian(g);
  double worst = 0;
  for (std::size_t i = 0; i < g->size(); ++i)
    worst = std::max(worst, std::abs(M[i] * M[i] - mu[i]));
  CHECK(worst < 1e-14);
}

TEST_CASE("integrate zero field") {
  auto g = make_grid(4.0, 9);
  CHECK(integrate(GridFunction(g)) == 0.0);
}

TEST_CASE("weighted_l2 basics and radial oracle") {
  auto g = make_grid(8.0, 49);
  CHECK(weighted_l2(GridFunction(g), 2.0) == 0.0);

  // beta = 0 reduces to the plain L2 norm
  GridFunction f(g);
  CounterRng rng{3, 9};
  for (std::size_t i = 0; i < g->size(); ++i) f[i] = rng.uniform(i, -1.0, 1.0);
  double plain = 0;
  for (std::size_t i = 0; i < g->size(); ++i) plain += g->weight(i) * f[i] * f[i];
  CHECK(weighted_l2(f, 0.0) == Catch::Approx(std::sqrt(plain)).epsilon(1e-13));

  // independent oracle for f = mu, beta = 2:
  // integral of <v>^2 mu^2 = 4 pi * int_0^inf r^2 (1+r^2) (2pi)^{-3} e^{-r^2} dr
  const double oracle = adaptive_simpson(
      [](double r) {
        return 4 * pi * std::pow(2 * pi, -3.0) * r * r * (1 + r * r) * std::exp(-r * r);
      },
      0.0, 12.0, 1e-14);
  const GridFunction mu = maxwellian(g);
  CHECK(weighted_l2(mu, 2.0) == Catch::Approx(std::sqrt(oracle)).epsilon(1e-5));
}

TEST_CASE("weighted_l2 is a norm (property)") {
  auto g = make_grid(5.0, 17);
  CounterRng rng{42, 4};
  for (int trial = 0; trial < 10; ++trial) {
    GridFunction a(g), b(g);
    for (std::size_t i = 0; i < g->size(); ++i) {
      a[i] = rng.uniform(1000 * trial + 2 * i, -1.0, 1.0);
      b[i] = rng.uniform(1000 * trial + 2 * i + 1, -1.0, 1.0);
    }
    const double beta = 0.7;
    const double lam = rng.uniform(900000 + trial, -3.0, 3.0);
    GridFunction la(g), apb(g);
    for (std::size_t i = 0; i < g->size(); ++i) {
      la[i] = lam * a[i];
      apb[i] = a[i] + b[i];
    }
    CHECK(weighted_l2(la, beta) ==
          Catch::Approx(std::abs(lam) * weighted_l2(a, beta)).margin(1e-10));
    CHECK(weighted_l2(apb, beta) <= weighted_l2(a, beta) + weighted_l2(b, beta) + 1e-10);
  }
}

TEST_CASE("quadrature convergence under refinement") {
  // super-algebraic convergence of the trapezoid rule on Gaussians:
  // halving the spacing must shrink the error by far more than 3x
  auto err = [](int n) {
    auto g = make_grid(8.0, n);
    return std::abs(integrate(maxwellian(g)) - 1.0);
  };
  // n=25 already reaches the rounding floor (~1e-14), so measure the
  // doubling where the error is still resolvable
  const double e1 = err(13), e2 = err(25);
  CHECK(e1 / std::max(e2, 1e-13) >= 3.0);
}

TEST_CASE("test function family") {
  TestFunctionSpec spec;
  spec.kind = TestFunctionKind::gaussian_poly;
  spec.degree = 0;
  spec.width = 1.5;
  const TestFunction pure(spec);
  CHECK(pure({0.3, -0.2, 1.0}) ==
        Catch::Approx(std::exp(-norm2(Vec3{0.3, -0.2, 1.0}) / 1.5)));

  // determinism: same seed -> same values
  TestFunctionSpec s2 = spec;
  s2.degree = 2;
  s2.seed = 99;
  const TestFunction f1(s2), f2(s2);
  auto g = make_grid(4.0, 9);
  const GridFunction ga = f1.sample(g), gb = f2.sample(g);
  for (std::size_t i = 0; i < g->size(); ++i) CHECK(ga[i] == gb[i]);

  // decay on the boundary shell |v| = R
  TestFunctionSpec s3;
  s3.degree = 2;
  s3.width = 1.2;
  s3.center = {0.5, 0, -0.5};
  s3.seed = 7;
  const TestFunction f3(s3);
  const double R = 8;
  double maxshell = 0;
  CounterRng rng{8, 8};
  for (int i = 0; i < 200; ++i) {
    Vec3 dir = rng.normal3(i);
    dir = dir / norm(dir);
    maxshell = std::max(maxshell, std::abs(f3(dir * R)));
  }
  CHECK(maxshell <= 100.0 * std::exp(-R * R / (2 * s3.width)));

  TestFunctionSpec bad;
  bad.degree = 9;
  CHECK_THROWS_AS(TestFunction(bad), InvalidInput);

  // the R^4 extension restricts to the member on the paraboloid
  const Vec3 v{0.7, -0.3, 0.4};
  CHECK(f3.extension(lift(v)) == f3(v));
}

TEST_CASE("field i/o round trip") {
  auto g = make_grid(3.0, 9);
  GridFunction f(g);
  CounterRng rng{5, 5};
  for (std::size_t i = 0; i < g->size(); ++i) f[i] = rng.uniform(i, -10.0, 10.0);

  const std::string path = "test_field_roundtrip.gf";
  save_field(path, f);
  const GridFunction back = load_field(path, g);
  for (std::size_t i = 0; i < g->size(); ++i) {
    CHECK(back[i] == f[i]);  // bitwise
  }

  // header mismatch
  auto g2 = make_grid(3.0, 11);
  CHECK_THROWS_AS(load_field(path, g2), InvalidInput);

  // empty / malformed file
  {
    std::ofstream out("test_field_empty.gf", std::ios::binary);
  }
  CHECK_THROWS_AS(load_field("test_field_empty.gf", g), InvalidInput);
  CHECK_THROWS_AS(load_field("does_not_exist.gf", g), InvalidInput);

  std::filesystem::remove(path);
  std::filesystem::remove("test_field_empty.gf");
}

TEST_CASE("tricubic interpolation reproduces cubics and nodes") {
  auto g = make_grid(4.0, 17);
  // cubic polynomial is reproduced exactly away from the boundary
  auto cubic = [](const Vec3& v) {
    return 1.0 + 0.5 * v.x - 0.25 * v.y * v.y + 0.125 * v.z * v.z * v.z + v.x * v.y;
  };
  const GridFunction f = GridFunction::sample(g, cubic);
  CounterRng rng{17, 3};
  for (int i = 0; i < 200; ++i) {
    const Vec3 v{rng.uniform(3 * i, -2.0, 2.0), rng.uniform(3 * i + 1, -2.0, 2.0),
                 rng.uniform(3 * i + 2, -2.0, 2.0)};
    CHECK(f(v) == Catch::Approx(cubic(v)).margin(1e-11));
  }
  // exact at the nodes
  for (std::size_t i : {std::size_t(0), g->size() / 2, g->size() - 1})
    CHECK(f(g->node(i)) == Catch::Approx(f[i]).margin(1e-12));
  // zero outside the box
  CHECK(f({5.0, 0, 0}) == 0.0);
}
