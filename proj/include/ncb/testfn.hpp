#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ncb/base.hpp"
#include "ncb/grid.hpp"
#include "ncb/numerics.hpp"
#include "ncb/rng.hpp"

namespace ncb {

enum class TestFunctionKind { gaussian_poly, hermite, bump };

struct TestFunctionSpec {
  TestFunctionKind kind = TestFunctionKind::gaussian_poly;
  Vec3 center{0, 0, 0};
  double width = 1.5;  // Gaussian factor exp(-|v-c|^2 / width)
  int degree = 2;      // polynomial degree <= 4
  std::uint64_t seed = 0;
};

// Smooth, rapidly decaying velocity profile with analytic evaluation.
// The R^4 extension is constant in the fourth coordinate, so the restriction
// to the paraboloid reproduces the member exactly and |grad_4|^k reduces to
// the three-dimensional derivatives.
class TestFunction {
 public:
  explicit TestFunction(const TestFunctionSpec& spec) : spec_(spec) {
    if (spec.degree < 0 || spec.degree > 4)
      throw InvalidInput("TestFunction: polynomial degree must lie in [0,4]");
    CounterRng rng{spec.seed, 0x7e57f};
    // monomial coefficients a_{ijk} for i+j+k <= degree, drawn in [-1,1]
    std::uint64_t ctr = 0;
    for (int i = 0; i <= spec.degree; ++i)
      for (int j = 0; i + j <= spec.degree; ++j)
        for (int k = 0; i + j + k <= spec.degree; ++k)
          coef_.push_back(Term{i, j, k, rng.uniform(ctr++, -1.0, 1.0)});
    if (spec.degree == 0) coef_.back().a = 1.0;  // pure profile for degree 0
  }

  const TestFunctionSpec& spec() const { return spec_; }

  double operator()(const Vec3& v) const {
    switch (spec_.kind) {
      case TestFunctionKind::gaussian_poly: {
        const Vec3 d = v - spec_.center;
        return poly(d) * std::exp(-norm2(d) / spec_.width);
      }
      case TestFunctionKind::hermite: {
        const Vec3 d = v - spec_.center;
        double h = 1.0;
        for (const Term& t : coef_)
          if (t.i + t.j + t.k == spec_.degree) {
            h = t.a;
            break;
          }
        return h * hermite_prod(d) * std::exp(-norm2(d) / spec_.width);
      }
      case TestFunctionKind::bump: {
        const double r2 = norm2(v - spec_.center) / (spec_.width * spec_.width);
        if (r2 >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - r2));
      }
    }
    return 0;
  }

  // Restriction of the (v4-constant) R^4 extension: identical to operator().
  double extension(const Vec4& x) const { return (*this)(Vec3{x.x, x.y, x.z}); }

  // |grad_4|^k of the extension restricted to the paraboloid, k = 0,1,2.
  // Central differences; the members are smooth so 1e-4 steps are ample.
  double grad4_norm(const Vec3& v, int k) const {
    if (k == 0) return std::abs((*this)(v));
    const double h = 1e-4;
    if (k == 1) {
      double g2 = 0;
      for (int a = 0; a < 3; ++a) {
        Vec3 vp = v, vm = v;
        vp[a] += h;
        vm[a] -= h;
        const double d = ((*this)(vp) - (*this)(vm)) / (2 * h);
        g2 += d * d;
      }
      return std::sqrt(g2);
    }
    // k == 2: spectral norm of the 3x3 Hessian (the v4 row/column vanish).
    double m[4][4] = {};
    const double f0 = (*this)(v);
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) {
        double d;
        if (a == b) {
          Vec3 vp = v, vm = v;
          vp[a] += h;
          vm[a] -= h;
          d = ((*this)(vp) - 2 * f0 + (*this)(vm)) / (h * h);
        } else {
          Vec3 vpp = v, vpm = v, vmp = v, vmm = v;
          vpp[a] += h; vpp[b] += h;
          vpm[a] += h; vpm[b] -= h;
          vmp[a] -= h; vmp[b] += h;
          vmm[a] -= h; vmm[b] -= h;
          d = ((*this)(vpp) - (*this)(vpm) - (*this)(vmp) + (*this)(vmm)) / (4 * h * h);
        }
        m[a][b] = m[b][a] = d;
      }
    return spectral_norm_sym4(m);
  }

  GridFunction sample(std::shared_ptr<const VelocityGrid> grid) const {
    return GridFunction::sample(std::move(grid), [this](const Vec3& v) { return (*this)(v); });
  }

 private:
  struct Term {
    int i, j, k;
    double a;
  };

  double poly(const Vec3& d) const {
    double acc = 0;
    for (const Term& t : coef_)
      acc += t.a * std::pow(d.x, t.i) * std::pow(d.y, t.j) * std::pow(d.z, t.k);
    return acc;
  }

  double hermite_prod(const Vec3& d) const {
    auto he = [](int n, double x) {
      double h0 = 1, h1 = x;
      if (n == 0) return h0;
      for (int k = 2; k <= n; ++k) {
        const double h2 = x * h1 - (k - 1) * h0;
        h0 = h1;
        h1 = h2;
      }
      return h1;
    };
    return he(spec_.degree, d.x) * he(std::max(0, spec_.degree - 1), d.y) * he(0, d.z);
  }

  TestFunctionSpec spec_;
  std::vector<Term> coef_;
};

inline TestFunction make_test_function(const TestFunctionSpec& spec) {
  return TestFunction(spec);
}

// Deterministic Gaussian-polynomial suite used by the audits: centers in
// [-1.5, 1.5]^3, widths in [0.9, 2.2], degree <= 2, all derived from one seed.
inline std::vector<TestFunction> make_suite(int count, std::uint64_t seed) {
  std::vector<TestFunction> suite;
  suite.reserve(count);
  CounterRng rng{seed, 0x5017e};
  for (int i = 0; i < count; ++i) {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::gaussian_poly;
    const std::uint64_t base = 16 * static_cast<std::uint64_t>(i);
    spec.center = {rng.uniform(base + 0, -1.5, 1.5), rng.uniform(base + 1, -1.5, 1.5),
                   rng.uniform(base + 2, -1.5, 1.5)};
    spec.width = rng.uniform(base + 3, 0.9, 2.2);
    spec.degree = static_cast<int>(rng.raw(base + 4) % 3);
    spec.seed = rng.raw(base + 5);
    suite.emplace_back(spec);
  }
  return suite;
}

}  // namespace ncb
