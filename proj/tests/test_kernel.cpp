#include <catch2/catch_amalgamated.hpp>

#include "ncb/kernel.hpp"
#include "ncb/rng.hpp"

using namespace ncb;

TEST_CASE("inverse-power parameters") {
  const KernelParams maxwell = from_inverse_power(5);
  CHECK(maxwell.gamma == Catch::Approx(0.0).margin(1e-15));
  CHECK(maxwell.s == Catch::Approx(0.25));

  const KernelParams hard = from_inverse_power(9);
  CHECK(hard.gamma == Catch::Approx(0.5));
  CHECK(hard.s == Catch::Approx(0.125));

  CHECK_THROWS_AS(from_inverse_power(3.0), InvalidInput);
  CHECK_THROWS_WITH(from_inverse_power(2.5), Catch::Matchers::ContainsSubstring("spectral gap"));
}

TEST_CASE("canonical angular profile") {
  KernelParams k = from_inverse_power(5);  // s = 1/4

  // supported on theta <= pi/2 only
  CHECK(b_angular(k, std::cos(0.75 * pi)) == 0.0);

  // theta = pi/2: b = (pi/2)^{-1.5} / sin(pi/2)
  CHECK(b_angular(k, 0.0) == 0.0);  // cos(pi/2) = 0 boundary sits in the support edge
  const double theta = 0.5 * pi - 1e-9;
  CHECK(b_angular(k, std::cos(theta)) ==
        Catch::Approx(std::pow(theta, -1.5) / std::sin(theta)).epsilon(1e-6));

  CHECK(std::isinf(b_angular(k, 1.0)));
  CHECK_THROWS_AS(b_angular(k, 1.5), InvalidInput);

  // two-sided envelope with c_b = 1 at 1e3 sampled angles
  CounterRng rng{11, 0};
  for (int i = 0; i < 1000; ++i) {
    const double th = rng.uniform(i, 1e-6, 0.5 * pi);
    const double sb = std::sin(th) * b_angular(k, std::cos(th));
    const double env = std::pow(th, -1.0 - 2 * k.s);
    CHECK(sb >= k.c_b * env * (1 - 1e-9));
    CHECK(sb <= env / k.c_b * (1 + 1e-9));
  }
}

TEST_CASE("kinetic factor") {
  KernelParams k;
  k.gamma = 0;
  CHECK(phi_kinetic(k, 3.7) == Catch::Approx(1.0));

  k.gamma = 0.5;
  CHECK(phi_kinetic(k, 2.0) == Catch::Approx(std::sqrt(2.0)));

  k.gamma = -0.5;
  CHECK(std::isinf(phi_kinetic(k, 0.0)));

  k.kinetic_mode = KineticMode::regularized;
  CHECK(phi_kinetic(k, 0.0) == Catch::Approx(1.0));
  CHECK_THROWS_AS(phi_kinetic(k, -1.0), InvalidInput);
}

TEST_CASE("symmetrized profile") {
  auto even = [](double) { return 1.0; };
  CHECK(symmetrized_b(even, -0.3) == 0.0);
  CHECK(symmetrized_b(even, 0.3) == Catch::Approx(2.0));

  // canonical profile already lives on t >= 0, so symmetrization is a no-op
  KernelParams k = from_inverse_power(5);
  auto canonical = [&](double t) { return t > 0 && t < 1 ? b_angular(k, t) : 0.0; };
  const double t = std::cos(0.4);
  CHECK(symmetrized_b(canonical, t) == Catch::Approx(canonical(t)));
}

TEST_CASE("dyadic partition completeness") {
  // right-closed indicator bands: sum over j in [0, J] is exactly 1 on (2^{-J-1}, 1]
  const int J = 12;
  CounterRng rng{13, 0};
  for (int i = 0; i < 2000; ++i) {
    const double r = rng.uniform(i, std::ldexp(1.0, -J - 1) + 1e-12, 1.0);
    double sum = 0;
    for (int j = 0; j <= J; ++j) sum += chi_dyadic(j, r);
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
  }
  // full-range partition on (0, 1]
  for (int i = 0; i < 200; ++i) {
    const double r = std::exp(rng.uniform(4000 + i, std::log(1e-8), 0.0));
    double sum = 0;
    for (int j = -2; j <= 40; ++j) sum += chi_dyadic(j, r);
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
    CHECK(chi_dyadic(dyadic_index_of(r), r) == 1.0);
  }
}

TEST_CASE("dyadic kernel support") {
  KernelParams k = from_inverse_power(5);
  const Vec3 v{1, 0, 0}, vs{-1, 0, 0};
  const Vec3 kdir = (v - vs) / norm(v - vs);

  // sigma = k gives |v - v'| = 0: outside every band
  CHECK(dyadic_kernel(k, 2, v, vs, kdir) == 0.0);
  CHECK_THROWS_AS(dyadic_kernel(k, 2, v, v, kdir), InvalidInput);

  // pick sigma so that |v-v'| sits mid-band for j=2
  double lo, hi;
  REQUIRE(dyadic_theta_window(2, norm(v - vs), lo, hi));
  const double theta = 0.5 * (lo + hi);
  Vec3 e1, e2;
  orthonormal_frame(kdir, e1, e2);
  const Vec3 sigma = std::cos(theta) * kdir + std::sin(theta) * e1;
  const double bj = dyadic_kernel(k, 2, v, vs, sigma);
  CHECK(bj > 0.0);
  CHECK(bj == Catch::Approx(phi_kinetic(k, 2.0) * b_angular(k, std::cos(theta))));
  // adjacent band must vanish at the same configuration
  CHECK(dyadic_kernel(k, 4, v, vs, sigma) == 0.0);

  // band condition <-> theta comparable to 2^{-j} / |v - v_*|
  const double mid = std::ldexp(1.0, -2) * 0.75 / norm(v - vs);
  CHECK(theta / (2 * std::asin(mid)) > 0.4);
  CHECK(theta / (2 * std::asin(mid)) < 2.6);
}

TEST_CASE("sphere integral scaling (bjEST)") {
  for (double p : {5.0, 9.0}) {
    KernelParams k = from_inverse_power(p);
    for (double r : {0.5, 1.0, 4.0}) {
      std::vector<double> js, logv;
      for (int j = 0; j <= 8; ++j) {
        const auto audit = sphere_integral_bound_audit(k, j, r);
        if (audit.value <= 0) continue;
        CHECK(audit.bound_ratio < 40.0);
        CHECK(audit.bound_ratio > 1e-4);
        js.push_back(j);
        logv.push_back(std::log2(audit.value));
      }
      REQUIRE(js.size() >= 5);
      const double slope = regression_slope(js, logv);
      CHECK(std::abs(slope - 2 * k.s) < 0.1);
    }
  }

  // empty band: lower edge beyond theta = pi/2
  KernelParams k = from_inverse_power(5);
  const auto empty = sphere_integral_bound_audit(k, -4, 0.5);  // band (8, 16], r sin(pi/4) ~ 0.35
  CHECK(empty.value == 0.0);
}
