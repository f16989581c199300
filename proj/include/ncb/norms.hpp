#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ncb/base.hpp"
#include "ncb/geometry.hpp"
#include "ncb/grid.hpp"
#include "ncb/kernel.hpp"
#include "ncb/numerics.hpp"
#include "ncb/parallel.hpp"
#include "ncb/trilinear.hpp"

namespace ncb {

// ---------------------------------------------------------------------------
// N^{s,gamma}: |f|^2 = |f|^2_{L2_{gamma+2s}} + anisotropic difference sum over
// pairs with |lift(v) - lift(v')| <= 1.
// ---------------------------------------------------------------------------

struct NormReport {
  double l2_part = 0;
  double derivative_part = 0;
  double total = 0;
  double pair_fraction = 0;  // fraction of node pairs inside the indicator
};

namespace norm_detail {

// angular factor of the diagonal-cell model:
// int_{S^2} (1 + |v|^2 cos^2 psi)^{-(3+2s)/2} d omega
inline double diag_angular(double speed, double s) {
  const Quad1D& gl = gauss_legendre(16);
  double acc = 0;
  for (int i = 0; i < 16; ++i)
    acc += gl.w[i] * std::pow(1.0 + speed * speed * gl.x[i] * gl.x[i], -0.5 * (3.0 + 2.0 * s));
  return 2.0 * pi * acc;
}

// central-difference gradient magnitude on the grid
inline double grad_mag(const GridFunction& f, int ix, int iy, int iz) {
  const VelocityGrid& g = f.grid();
  const int n = g.n();
  const double h = g.spacing();
  auto diff = [&](int a) {
    int c[3] = {ix, iy, iz};
    double num = 0, den = 0;
    if (c[a] + 1 < n && c[a] - 1 >= 0) {
      int p[3] = {ix, iy, iz}, m[3] = {ix, iy, iz};
      ++p[a];
      --m[a];
      num = f[g.index(p[0], p[1], p[2])] - f[g.index(m[0], m[1], m[2])];
      den = 2 * h;
    } else if (c[a] + 1 < n) {
      int p[3] = {ix, iy, iz};
      ++p[a];
      num = f[g.index(p[0], p[1], p[2])] - f[g.index(ix, iy, iz)];
      den = h;
    } else if (c[a] - 1 >= 0) {
      int m[3] = {ix, iy, iz};
      --m[a];
      num = f[g.index(ix, iy, iz)] - f[g.index(m[0], m[1], m[2])];
      den = h;
    }
    return den > 0 ? num / den : 0.0;
  };
  const double dx = diff(0), dy = diff(1), dz = diff(2);
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace norm_detail

inline NormReport n_norm(const GridFunction& f, const KernelParams& k) {
  const VelocityGrid& g = f.grid();
  const int n = g.n();
  const double h = g.spacing();
  const double beta = k.gamma_2s();
  const double wexp = 0.5 * (beta + 1.0);
  const int reach = static_cast<int>(std::ceil(1.0 / h));
  // equal-volume radius of one cell, the diagonal-model region
  const double r_cell = std::min(0.5, h * std::pow(3.0 / (4.0 * pi), 1.0 / 3.0));

  std::vector<double> part(g.size(), 0.0);
  std::vector<double> pairs_in(g.size(), 0.0);
  parallel_for(g.size(), [&](std::size_t i) {
    const int iz = static_cast<int>(i % n);
    const int iy = static_cast<int>((i / n) % n);
    const int ix = static_cast<int>(i / (static_cast<std::size_t>(n) * n));
    const Vec3 v = g.node(i);
    const Vec4 lv = lift(v);
    const double wv = std::pow(1.0 + norm2(v), wexp);
    double acc = 0;
    double count = 0;
    for (int dx = -reach; dx <= reach; ++dx)
      for (int dy = -reach; dy <= reach; ++dy)
        for (int dz = -reach; dz <= reach; ++dz) {
          const int jx = ix + dx, jy = iy + dy, jz = iz + dz;
          if (jx < 0 || jy < 0 || jz < 0 || jx >= n || jy >= n || jz >= n) continue;
          if (dx == 0 && dy == 0 && dz == 0) continue;
          const std::size_t ip = g.index(jx, jy, jz);
          const Vec3 vp = g.node(ip);
          const double d4 = norm(lift(vp) - lv);
          if (d4 > 1.0) continue;
          count += 1;
          const double df = f[ip] - f[i];
          acc += g.weight(ip) * std::pow(1.0 + norm2(vp), wexp) * df * df /
                 std::pow(d4, 3.0 + 2.0 * k.s);
        }
    // diagonal cell: (f'-f)^2 ~ |grad f|^2 |v-v'|^2 integrated over the cell
    const double gm = norm_detail::grad_mag(f, ix, iy, iz);
    const double diag = gm * gm * wv * norm_detail::diag_angular(norm(v), k.s) *
                        std::pow(r_cell, 2.0 - 2.0 * k.s) / (2.0 - 2.0 * k.s);
    part[i] = g.weight(i) * (wv * acc + diag);
    pairs_in[i] = count;
  });

  NormReport rep;
  double dsum = 0, cnt = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    dsum += part[i];
    cnt += pairs_in[i];
  }
  rep.l2_part = weighted_l2(f, beta);
  rep.derivative_part = std::sqrt(std::max(0.0, dsum));
  rep.total = std::sqrt(rep.l2_part * rep.l2_part + dsum);
  rep.pair_fraction = cnt / (static_cast<double>(g.size()) * static_cast<double>(g.size()));
  return rep;
}

// ---------------------------------------------------------------------------
// (eta, delta)-norms
// ---------------------------------------------------------------------------

struct EtaDeltaSpec {
  double eta = 1;
  double delta = 1;
  void validate() const {
    if (!(eta > 0) || !(delta > 0)) throw InvalidInput("EtaDeltaSpec: eta, delta must be positive");
  }
};

// | f |_{eta,delta} = (int f^2 (eta <v>^{gamma+2s} + 1/delta))^{1/2}
inline double eta_delta_norm(const GridFunction& f, const KernelParams& k,
                             const EtaDeltaSpec& spec) {
  spec.validate();
  const VelocityGrid& g = f.grid();
  double acc = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double w = spec.eta * std::pow(1.0 + norm2(g.node(i)), 0.5 * k.gamma_2s()) +
                     1.0 / spec.delta;
    acc += g.weight(i) * w * f[i] * f[i];
  }
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Carleman kernel K(v,v') of the |.|_B seminorm and both seminorm routes
// ---------------------------------------------------------------------------

// K(v,v') = 2 int_{E^v_{v'}} dpi M(v'_* + v' - v) M(v'_*)
//             Phi(|v'-v'_*|) b(cos theta_c) / (|v-v'| |v'-v'_*|),
// plane through v with normal v'-v, v'_* = v + rho omega, and
// tan(theta_c/2) = |v-v'| / rho (support rho >= |v-v'|).
inline double carleman_kernel_K(const KernelParams& k, const Vec3& v, const Vec3& vp,
                                const QuadratureSpec& q) {
  const Vec3 dvec = vp - v;
  const double d = norm(dvec);
  if (d < 1e-14) throw InvalidInput("carleman_kernel_K: coincident velocities");
  const CarlemanPlane plane = carleman_plane(v, vp);
  const double rho_max = std::max(norm(v), norm(vp)) + q.plane_radius;
  const int n = std::max(8, static_cast<int>(std::ceil(std::log10(rho_max / d) * 2 * q.plane_per_decade)));
  const Quad1D gl = gauss_legendre(n, std::log(d), std::log(rho_max));
  const double walpha = 2.0 * pi / q.plane_alpha;
  double acc = 0;
  for (int ir = 0; ir < n; ++ir) {
    const double rho = std::exp(gl.x[ir]);
    const double wr = gl.w[ir] * rho * rho;  // rho d rho
    const double theta_c = 2.0 * std::atan(d / rho);
    const double b = std::pow(theta_c, -1.0 - 2.0 * k.s) / std::sin(theta_c);
    const double sep = std::sqrt(d * d + rho * rho);  // |v' - v'_*|
    double inner = 0;
    for (int ia = 0; ia < q.plane_alpha; ++ia) {
      const double a = walpha * (ia + 0.5);
      const Vec3 u = plane.point(rho, a) - v;  // rho * omega
      inner += sqrt_maxwellian_value(vp + u) * sqrt_maxwellian_value(v + u);
    }
    acc += wr * walpha * inner * phi_kinetic(k, sep) * b / (d * sep);
  }
  return 2.0 * acc;
}

struct SeminormReport {
  double value = 0;
  double error_estimate = 0;
};

// sigma route: |f|_B^2 = 1/2 int B (f'-f)^2 M'_* M_*
template <class F>
SeminormReport b_seminorm_sigma(const F& f, const KernelParams& k, const QuadratureSpec& q) {
  q.validate();
  auto sums = tri_detail::sigma_sweep(
      k, q, [&](const Vec3& v, const Vec3& vs, const Vec3& vp, const Vec3& vsp) {
        const double df = f(vp) - f(v);
        return 0.5 * df * df * sqrt_maxwellian_value(vsp) * sqrt_maxwellian_value(vs);
      });
  SeminormReport rep;
  rep.value = extrapolate_cutoff(sums.sum, k.s, &rep.error_estimate);
  return rep;
}

// Precomputed pair table of K(v,v') on a ball grid; the kernel does not
// depend on the function, so one table serves a whole suite.
class CarlemanKernelTable {
 public:
  CarlemanKernelTable(const KernelParams& k, const QuadratureSpec& q, double radius,
                      double spacing)
      : k_(k), q_(q), ball_(radius, spacing) {
    const std::size_t n = ball_.node.size();
    kernel_.assign(n * (n - 1) / 2, 0.0);
    parallel_for(n, [&](std::size_t i) {
      for (std::size_t j = i + 1; j < n; ++j)
        kernel_[pair_index(i, j, n)] = carleman_kernel_K(k_, ball_.node[i], ball_.node[j], q_);
    });
    // diagonal-cell model weights: K(v, v+u) ~ A(v, omega) |u|^{-3-2s} near the
    // diagonal; probe A at half the cell radius on a small direction set
    const double h = spacing;
    r_cell_ = h * std::pow(3.0 / (4.0 * pi), 1.0 / 3.0);
    const double rp = 0.5 * r_cell_;
    diag_.assign(n, 0.0);
    static const std::vector<Vec3> dirs = {
        {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1},
        {0.5773502691896258, 0.5773502691896258, 0.5773502691896258},
        {-0.5773502691896258, 0.5773502691896258, -0.5773502691896258}};
    parallel_for(n, [&](std::size_t i) {
      double a = 0;
      for (const Vec3& w : dirs)
        a += carleman_kernel_K(k_, ball_.node[i], ball_.node[i] + rp * w, q_) *
             std::pow(rp, 3.0 + 2.0 * k_.s);
      a *= 4.0 * pi / dirs.size();
      diag_[i] = a * std::pow(r_cell_, 2.0 - 2.0 * k_.s) / (2.0 - 2.0 * k_.s);
    });
  }

  const BallGrid& ball() const { return ball_; }

  // |f|_B^2 through the table; grad_f supplies |grad f| for the diagonal model
  template <class F, class GradF>
  double apply(const F& f, const GradF& grad_f) const {
    const std::size_t n = ball_.node.size();
    std::vector<double> fv(n);
    for (std::size_t i = 0; i < n; ++i) fv[i] = f(ball_.node[i]);
    const double w2 = ball_.w * ball_.w;
    double acc = parallel_sum(n, [&](std::size_t i) {
      double row = 0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double df = fv[j] - fv[i];
        row += kernel_[pair_index(i, j, n)] * df * df;
      }
      return 2.0 * w2 * row;  // symmetric pair counted once
    });
    for (std::size_t i = 0; i < n; ++i) {
      const double gm = grad_f(ball_.node[i]);
      acc += ball_.w * diag_[i] * gm * gm;
    }
    return acc;
  }

 private:
  static std::size_t pair_index(std::size_t i, std::size_t j, std::size_t n) {
    return i * n - i * (i + 1) / 2 + (j - i - 1);
  }

  KernelParams k_;
  QuadratureSpec q_;
  BallGrid ball_;
  std::vector<double> kernel_;
  std::vector<double> diag_;
  double r_cell_ = 0;
};

// Carleman route with a self-convergence error estimate (coarser companion
// table). Heavy to construct; reuse the table across a suite when possible.
template <class F, class GradF>
SeminormReport b_seminorm_carleman(const F& f, const GradF& grad_f, const KernelParams& k,
                                   const QuadratureSpec& q) {
  CarlemanKernelTable fine(k, q, q.outer_radius, q.outer_spacing);
  CarlemanKernelTable coarse(k, q, q.outer_radius, 1.35 * q.outer_spacing);
  SeminormReport rep;
  rep.value = fine.apply(f, grad_f);
  rep.error_estimate = std::abs(rep.value - coarse.apply(f, grad_f));
  return rep;
}

// <N g, g> two ways: (a) sigma route + int nu g^2, (b) Carleman-kernel route
// + int nu g^2. nu is supplied by the caller (single source of truth in the
// linearized-dynamics module).
struct NInnerReport {
  double value_sigma = 0;
  double value_carleman = 0;
  double identity_residual = 0;
  double error_estimate = 0;
};

template <class G, class GradG, class Nu>
NInnerReport n_inner(const G& g, const GradG& grad_g, const Nu& nu, const KernelParams& k,
                     const QuadratureSpec& q) {
  const SeminormReport sig = b_seminorm_sigma(g, k, q);
  const SeminormReport car = b_seminorm_carleman(g, grad_g, k, q);
  const BallGrid outer(q.outer_radius, q.outer_spacing);
  double nu_part = 0;
  for (const Vec3& v : outer.node) nu_part += outer.w * nu(v) * g(v) * g(v);
  NInnerReport rep;
  rep.value_sigma = sig.value + nu_part;
  rep.value_carleman = car.value + nu_part;
  rep.identity_residual = std::abs(rep.value_sigma - rep.value_carleman);
  rep.error_estimate = sig.error_estimate + car.error_estimate;
  return rep;
}

// ---------------------------------------------------------------------------
// Psi(lambda) = int_0^a |e^{2 pi i lambda t} - 1|^2 t^{-1-2s} dt
// ---------------------------------------------------------------------------

inline double psi_integral(double lambda, double s, double a) {
  if (lambda < 0 || !(a > 0)) throw InvalidInput("psi_integral: need lambda >= 0, a > 0");
  if (!(s > 0 && s < 1)) throw InvalidInput("psi_integral: s outside (0,1)");
  if (lambda == 0) return 0;
  // substitute u = lambda t:  Psi = 4 lambda^{2s} int_0^{lambda a} sin^2(pi u) u^{-1-2s} du
  const double X = lambda * a;
  auto w_integrand = [s](double u) {
    const double snu = std::sin(pi * u);
    return snu * snu * std::pow(u, -1.0 - 2.0 * s);
  };
  double W = 0;
  const double head = std::min(1.0, X);
  {
    // t = e^tau substitution handles the u -> 0 power cleanly
    const double lo = head * 1e-8;
    W += pi * pi * std::pow(lo, 2.0 - 2.0 * s) / (2.0 - 2.0 * s);  // analytic sliver
    const Quad1D gl = gauss_legendre(64, std::log(lo), std::log(head));
    for (int i = 0; i < 64; ++i) {
      const double u = std::exp(gl.x[i]);
      W += gl.w[i] * u * w_integrand(u);
    }
  }
  if (X > 1.0) {
    // unit intervals resolve the oscillation; GL-6 per interval
    double lo = 1.0;
    while (lo < X) {
      const double hi = std::min(lo + 1.0, X);
      const Quad1D gl = gauss_legendre(6, lo, hi);
      for (int i = 0; i < 6; ++i) W += gl.w[i] * w_integrand(gl.x[i]);
      lo = hi;
    }
  }
  return 4.0 * std::pow(lambda, 2.0 * s) * W;
}

// ---------------------------------------------------------------------------
// Fourier redistribution check on a periodic lattice
// ---------------------------------------------------------------------------

struct RedistributionRow {
  Vec3 xi;
  double lhs = 0;  // full-kernel side
  double rhs = 0;  // angularly restricted side
};

struct RedistributionReport {
  std::vector<RedistributionRow> rows;
  double min_admissible_C = 0;  // max over the sweep of (lhs - rhs)_+
  double slope_lhs = 0, slope_rhs = 0;
};

inline RedistributionReport fourier_redistribution_check(double s, double eps, int n,
                                                         const std::vector<Vec3>& sweep) {
  if (n < 8 || (n & (n - 1)) != 0)
    throw InvalidInput("fourier_redistribution_check: n must be a power of two >= 8");
  const double h = 2.0 / n;
  // lattice of midpoints of [-1,1)^3 restricted to the unit ball
  std::vector<Vec3> pts;
  std::vector<double> k1;
  std::vector<char> in2;
  for (int ix = 0; ix < n; ++ix)
    for (int iy = 0; iy < n; ++iy)
      for (int iz = 0; iz < n; ++iz) {
        const Vec3 u{-1 + (ix + 0.5) * h, -1 + (iy + 0.5) * h, -1 + (iz + 0.5) * h};
        const double r = norm(u);
        if (r > 1.0 || r == 0.0) continue;
        pts.push_back(u);
        k1.push_back(std::pow(r, -3.0 - 2.0 * s));
        in2.push_back(std::abs(u.z) <= eps * r ? 1 : 0);
      }
  RedistributionReport rep;
  rep.rows.resize(sweep.size());
  const double cell = h * h * h;
  parallel_for(sweep.size(), [&](std::size_t i) {
    const Vec3 xi = sweep[i];
    double lhs = 0, rhs = 0;
    for (std::size_t p = 0; p < pts.size(); ++p) {
      const double osc = 2.0 - 2.0 * std::cos(2.0 * pi * dot(xi, pts[p]));
      const double val = k1[p] * osc * cell;
      lhs += val;
      if (in2[p]) rhs += val;
    }
    rep.rows[i] = {xi, lhs, rhs};
  });
  double c = 0;
  std::vector<double> lx, ll, lr;
  for (const auto& row : rep.rows) {
    c = std::max(c, row.lhs - row.rhs);
    const double m = norm(row.xi);
    if (m >= 4.0) {
      lx.push_back(std::log2(m));
      ll.push_back(std::log2(row.lhs));
      lr.push_back(std::log2(row.rhs));
    }
  }
  rep.min_admissible_C = c;
  if (lx.size() >= 3) {
    rep.slope_lhs = regression_slope(lx, ll);
    rep.slope_rhs = regression_slope(lx, lr);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Patchwise Sobolev characterization
// ---------------------------------------------------------------------------

// Sum over patch centers of <v_i>^{gamma+2s-1} |f_i|^2_{H^s} with
// f_i(u) = phi_i(lift(v_i + tau u)) f(v_i + tau u) and the difference form of
// H^s. The partition is built from R^4 bumps normalized pointwise.
template <class F>
double patchwise_sobolev(const F& f, const KernelParams& k, double patch_radius,
                         double cover_radius = 4.5, int m_u = 10) {
  if (!(patch_radius > 0.2)) throw InvalidInput("patchwise_sobolev: patch radius too small");
  // centers on a lattice in velocity space
  std::vector<Vec3> centers;
  const int m = static_cast<int>(std::ceil(cover_radius / patch_radius));
  for (int ix = -m; ix <= m; ++ix)
    for (int iy = -m; iy <= m; ++iy)
      for (int iz = -m; iz <= m; ++iz) {
        const Vec3 c{ix * patch_radius, iy * patch_radius, iz * patch_radius};
        if (norm(c) <= cover_radius) centers.push_back(c);
      }
  const double support = 1.6 * patch_radius;  // R^4 bump radius; overlapping cover
  auto bump = [&](const Vec4& x, const Vec4& c) {
    const double t = norm2(x - c) / (support * support);
    return t >= 1.0 ? 0.0 : std::exp(-t / (1.0 - t));
  };
  auto partition = [&](const Vec3& v, const Vec3& center) {
    const Vec4 x = lift(v);
    const double num = bump(x, lift(center));
    if (num == 0) return 0.0;
    double den = 0;
    for (const Vec3& c : centers) den += bump(x, lift(c));
    return num / den;
  };

  std::vector<double> per_patch(centers.size(), 0.0);
  parallel_for(centers.size(), [&](std::size_t ci) {
    const Vec3 c = centers[ci];
    // sample f_i on a u-grid covering the patch support
    const double L = 1.05 * support;
    const double hu = 2 * L / m_u;
    std::vector<Vec3> us;
    std::vector<double> fi;
    bool any = false;
    for (int ix = 0; ix < m_u; ++ix)
      for (int iy = 0; iy < m_u; ++iy)
        for (int iz = 0; iz < m_u; ++iz) {
          const Vec3 u{-L + (ix + 0.5) * hu, -L + (iy + 0.5) * hu, -L + (iz + 0.5) * hu};
          const Vec3 v = c + tangent_tau(c, u);
          const double val = partition(v, c) * f(v);
          us.push_back(u);
          fi.push_back(val);
          any = any || val != 0.0;
        }
    if (!any) {
      per_patch[ci] = 0.0;
      return;
    }
    const double w = hu * hu * hu;
    double l2 = 0;
    for (double x : fi) l2 += w * x * x;
    double diff = 0;
    for (std::size_t a = 0; a < us.size(); ++a)
      for (std::size_t b = a + 1; b < us.size(); ++b) {
        const double d = norm(us[a] - us[b]);
        if (d > 1.0) continue;
        const double dv = fi[a] - fi[b];
        diff += 2.0 * w * w * dv * dv * std::pow(d, -3.0 - 2.0 * k.s);
      }
    per_patch[ci] = std::pow(1.0 + norm2(c), 0.5 * (k.gamma_2s() - 1.0)) * (l2 + diff);
  });
  double acc = 0;
  for (double x : per_patch) acc += x;
  return acc;
}

}  // namespace ncb
