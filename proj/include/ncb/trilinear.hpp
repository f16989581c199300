#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ncb/base.hpp"
#include "ncb/geometry.hpp"
#include "ncb/grid.hpp"
#include "ncb/kernel.hpp"
#include "ncb/numerics.hpp"
#include "ncb/parallel.hpp"
#include "ncb/rng.hpp"

namespace ncb {

// Quadrature controls for the collision-form evaluations.
struct QuadratureSpec {
  // singular theta quadrature: GL panels in log(theta) over [eps, pi/2] with
  // cutoff levels eps * {4, 2, 1}, extrapolated assuming O(eps^{2-2s})
  int theta_per_decade = 8;
  int phi_nodes = 8;
  double eps_theta = 2.5e-3;
  int eps_levels = 3;

  // Carleman-plane quadrature
  int plane_per_decade = 6;
  int plane_alpha = 8;
  double plane_radius = 13.0;  // radial truncation beyond the anchor speed

  // outer product grids (deterministic backend)
  double outer_radius = 6.0;
  double outer_spacing = 0.75;
  double star_radius = 5.0;
  double star_spacing = 1.0;

  // Monte Carlo backend
  long long mc_samples = 2000000;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(eps_theta > 0 && eps_theta < 0.25 * pi))
      throw InvalidInput("QuadratureSpec: eps_theta outside (0, pi/4)");
    if (theta_per_decade < 2 || phi_nodes < 2 || plane_per_decade < 2 || plane_alpha < 2)
      throw InvalidInput("QuadratureSpec: node counts too small");
    if (eps_levels < 2 || eps_levels > 3)
      throw InvalidInput("QuadratureSpec: eps_levels must be 2 or 3");
    if (mc_samples < 1000) throw InvalidInput("QuadratureSpec: mc_samples too small");
  }
};

enum class Backend { product, monte_carlo };
enum class Representation { sigma, carleman, dual };

inline const char* to_string(Backend b) {
  return b == Backend::product ? "product" : "monte_carlo";
}
inline const char* to_string(Representation r) {
  switch (r) {
    case Representation::sigma: return "sigma";
    case Representation::carleman: return "carleman";
    default: return "dual";
  }
}

struct TrilinearReport {
  double value = 0;
  double error_estimate = 0;
  Backend backend = Backend::product;
  Representation representation = Representation::sigma;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Shared scaffolding
// ---------------------------------------------------------------------------

// Cutoff levels, coarse to fine: eps * 2^{L-1}, ..., eps.
inline std::vector<double> cutoff_levels(const QuadratureSpec& q) {
  std::vector<double> eps(q.eps_levels);
  for (int l = 0; l < q.eps_levels; ++l)
    eps[l] = q.eps_theta * std::ldexp(1.0, q.eps_levels - 1 - l);
  return eps;
}

// Richardson extrapolation of the cutoff family I(eps_l) (coarse..fine)
// assuming an O(eps^{2-2s}) residual. In strict mode, growing differences
// signal divergence; noisy (Monte Carlo) families skip that check.
inline double extrapolate_cutoff(const std::vector<double>& vals, double s, double* error,
                                 double scale_hint = 0.0, bool strict = true) {
  const int n = static_cast<int>(vals.size());
  const double beta = 2.0 - 2.0 * s;
  const double fac = std::pow(2.0, beta) - 1.0;
  const double d_last = vals[n - 1] - vals[n - 2];
  const double extrap = vals[n - 1] + d_last / fac;
  double err = std::abs(d_last) / fac;
  if (n >= 3) {
    const double d_prev = vals[n - 2] - vals[n - 3];
    const double extrap_prev = vals[n - 2] + d_prev / fac;
    err += std::abs(extrap - extrap_prev);
    const double scale = std::max({std::abs(vals[n - 1]), std::abs(scale_hint), 1e-300});
    if (strict && std::abs(d_last) > std::abs(d_prev) && std::abs(d_last) > 1e-6 * scale)
      throw NumericalFailure("extrapolate_cutoff: cutoff differences are growing");
  }
  if (error) *error = err;
  return extrap;
}

// GL nodes in log(theta) over [eps_fine, pi/2]. level[i] is the index of the
// coarsest cutoff below theta[i]; a node contributes to buckets level..L-1.
struct ThetaGrid {
  std::vector<double> theta, weight;  // weight includes d(theta)
  std::vector<int> level;

  explicit ThetaGrid(const QuadratureSpec& q) {
    const std::vector<double> eps = cutoff_levels(q);
    std::vector<double> edges(eps.rbegin(), eps.rend());  // fine..coarse
    edges.push_back(0.5 * pi);
    for (std::size_t seg = 0; seg + 1 < edges.size(); ++seg) {
      const double lo = edges[seg], hi = edges[seg + 1];
      const int n = std::max(2, static_cast<int>(std::ceil(std::log10(hi / lo) * q.theta_per_decade)));
      const Quad1D gl = gauss_legendre(n, std::log(lo), std::log(hi));
      for (int i = 0; i < n; ++i) {
        const double th = std::exp(gl.x[i]);
        theta.push_back(th);
        weight.push_back(gl.w[i] * th);
        int lv = static_cast<int>(eps.size()) - 1;
        for (std::size_t l = 0; l < eps.size(); ++l)
          if (th >= eps[l]) {
            lv = static_cast<int>(l);
            break;
          }
        level.push_back(lv);
      }
    }
  }
};

// Uniform midpoint ball grid, the outer deterministic quadrature.
struct BallGrid {
  std::vector<Vec3> node;
  double w = 0;  // common midpoint weight h^3

  BallGrid() = default;
  BallGrid(double radius, double spacing) {
    const int m = static_cast<int>(std::ceil(radius / spacing) + 1);
    w = spacing * spacing * spacing;
    for (int ix = -m; ix <= m; ++ix)
      for (int iy = -m; iy <= m; ++iy)
        for (int iz = -m; iz <= m; ++iz) {
          const Vec3 v{(ix + 0.5) * spacing, (iy + 0.5) * spacing, (iz + 0.5) * spacing};
          if (norm2(v) <= radius * radius) node.push_back(v);
        }
  }
};

namespace tri_detail {

struct LevelSums {
  std::vector<double> sum;
  explicit LevelSums(int levels = 0) : sum(levels, 0.0) {}
  void add(int min_level, double x) {
    for (std::size_t l = min_level; l < sum.size(); ++l) sum[l] += x;
  }
  LevelSums& operator+=(const LevelSums& o) {
    for (std::size_t l = 0; l < sum.size(); ++l) sum[l] += o.sum[l];
    return *this;
  }
};

// Deterministic sweep of the full singular sigma geometry. The integrand
// callback returns everything except Phi(r) * theta^{-1-2s} and the measure
// weights; B sin(theta) = Phi theta^{-1-2s} for the canonical profile.
template <class Integrand>
LevelSums sigma_sweep(const KernelParams& k, const QuadratureSpec& q, Integrand&& integrand) {
  const ThetaGrid tg(q);
  const BallGrid outer(q.outer_radius, q.outer_spacing);
  const BallGrid star(q.star_radius, q.star_spacing);
  const double wphi = 2.0 * pi / q.phi_nodes;
  const int L = q.eps_levels;

  std::vector<LevelSums> slot(outer.node.size(), LevelSums(L));
  parallel_for(outer.node.size(), [&](std::size_t io) {
    LevelSums acc(L);
    const Vec3 v = outer.node[io];
    for (const Vec3& vs : star.node) {
      const Vec3 rel = v - vs;
      const double r = norm(rel);
      if (r < 1e-12) continue;
      const Vec3 kdir = rel / r;
      Vec3 e1, e2;
      orthonormal_frame(kdir, e1, e2);
      const double phik = phi_kinetic(k, r);
      const Vec3 mid = 0.5 * (v + vs);
      for (std::size_t it = 0; it < tg.theta.size(); ++it) {
        const double th = tg.theta[it];
        const double base = tg.weight[it] * std::pow(th, -1.0 - 2.0 * k.s) * phik * wphi;
        const double ct = std::cos(th), st = std::sin(th);
        double inner = 0;
        for (int ip = 0; ip < q.phi_nodes; ++ip) {
          const double a = wphi * (ip + 0.5);
          const Vec3 sigma = ct * kdir + st * (std::cos(a) * e1 + std::sin(a) * e2);
          const Vec3 vp = mid + (0.5 * r) * sigma;
          const Vec3 vsp = mid - (0.5 * r) * sigma;
          inner += integrand(v, vs, vp, vsp);
        }
        acc.add(tg.level[it], base * inner * outer.w * star.w);
      }
    }
    slot[io] = acc;
  });

  LevelSums total(L);
  for (const auto& sl : slot) total += sl;
  return total;
}

// Deterministic sweep of a single dyadic band j in sigma geometry.
template <class Integrand>
double dyadic_sigma_sweep(const KernelParams& k, const QuadratureSpec& q, int j,
                          Integrand&& integrand) {
  const BallGrid outer(q.outer_radius, q.outer_spacing);
  const BallGrid star(q.star_radius, q.star_spacing);
  const double wphi = 2.0 * pi / q.phi_nodes;

  return parallel_sum(outer.node.size(), [&](std::size_t io) {
    double acc = 0;
    const Vec3 v = outer.node[io];
    for (const Vec3& vs : star.node) {
      const Vec3 rel = v - vs;
      const double r = norm(rel);
      if (r < 1e-12) continue;
      double lo, hi;
      if (!dyadic_theta_window(j, r, lo, hi)) continue;
      const Vec3 kdir = rel / r;
      Vec3 e1, e2;
      orthonormal_frame(kdir, e1, e2);
      const double phik = phi_kinetic(k, r);
      const Vec3 mid = 0.5 * (v + vs);
      const int n = std::max(4, static_cast<int>(std::ceil(std::log10(hi / lo) * 4 * q.theta_per_decade)));
      const Quad1D gl = gauss_legendre(n, std::log(lo), std::log(hi));
      for (int it = 0; it < n; ++it) {
        const double th = std::exp(gl.x[it]);
        const double base = gl.w[it] * th * std::pow(th, -1.0 - 2.0 * k.s) * phik * wphi;
        const double ct = std::cos(th), st = std::sin(th);
        double inner = 0;
        for (int ip = 0; ip < q.phi_nodes; ++ip) {
          const double a = wphi * (ip + 0.5);
          const Vec3 sigma = ct * kdir + st * (std::cos(a) * e1 + std::sin(a) * e2);
          const Vec3 vp = mid + (0.5 * r) * sigma;
          const Vec3 vsp = mid - (0.5 * r) * sigma;
          inner += integrand(v, vs, vp, vsp);
        }
        acc += base * inner * outer.w * star.w;
      }
    }
    return acc;
  });
}

// Carleman-plane geometry shared by the dual form, the Carleman gain form and
// T*_j. Anchors: vp (the distinguished post-collision velocity) and vs; the
// plane passes through vp with normal vp - vs; the plane variable is
//   v = vp + rho * omega(alpha),   rho = |vp - vs| tan(theta_c / 2),
// where theta_c is the deviation angle, so the dyadic band in |v - vp| is a
// band in rho and the angular cutoff in theta_c maps to a disk cutoff.
struct PlaneFrame {
  Vec3 e1, e2;
  double dstar;
  PlaneFrame(const Vec3& vp, const Vec3& vs) {
    const Vec3 d = vp - vs;
    dstar = norm(d);
    Vec3 n = d / dstar;
    orthonormal_frame(n, e1, e2);
  }
};

// theta_c-parametrized radial rule on the plane: returns nodes (rho, w) with
// w = rho * d(rho) from d(theta_c) GL panels in log(theta_c) over [lo, hi].
inline void plane_radial_nodes(double dstar, double lo, double hi, int per_decade,
                               std::vector<double>& rho, std::vector<double>& w,
                               std::vector<int>* level = nullptr,
                               const std::vector<double>* eps = nullptr) {
  rho.clear();
  w.clear();
  if (level) level->clear();
  const int n = std::max(4, static_cast<int>(std::ceil(std::log10(hi / lo) * per_decade)));
  const Quad1D gl = gauss_legendre(n, std::log(lo), std::log(hi));
  for (int i = 0; i < n; ++i) {
    const double th = std::exp(gl.x[i]);
    const double tn = std::tan(0.5 * th);
    const double r = dstar * tn;
    // rho d rho = dstar^2 tan(th/2) * (1/2) sec^2(th/2) d th
    const double sec2 = 1.0 + tn * tn;
    rho.push_back(r);
    w.push_back(gl.w[i] * th * dstar * dstar * tn * 0.5 * sec2);
    if (level && eps) {
      int lv = static_cast<int>(eps->size()) - 1;
      for (std::size_t l = 0; l < eps->size(); ++l)
        if (th >= (*eps)[l]) {
          lv = static_cast<int>(l);
          break;
        }
      level->push_back(lv);
    }
  }
}

// Deterministic sweep of the full singular dual/Carleman geometry.
// The integrand gets (vprime, vstar, v_on_plane, theta_c) and must include
// every factor except the plane measure (already in the weights) and the
// outer measures.
template <class Integrand>
LevelSums plane_sweep(const KernelParams& k, const QuadratureSpec& q, Integrand&& integrand) {
  const BallGrid outer(q.outer_radius, q.outer_spacing);
  const BallGrid star(q.star_radius, q.star_spacing);
  const std::vector<double> eps = cutoff_levels(q);
  const double walpha = 2.0 * pi / q.plane_alpha;
  const int L = q.eps_levels;

  std::vector<LevelSums> slot(outer.node.size(), LevelSums(L));
  parallel_for(outer.node.size(), [&](std::size_t io) {
    LevelSums acc(L);
    const Vec3 vp = outer.node[io];
    std::vector<double> rho, w;
    std::vector<int> lvl;
    for (const Vec3& vs : star.node) {
      if (norm2(vp - vs) < 1e-24) continue;
      const PlaneFrame fr(vp, vs);
      plane_radial_nodes(fr.dstar, eps.back(), 0.5 * pi, q.plane_per_decade, rho, w, &lvl, &eps);
      for (std::size_t ir = 0; ir < rho.size(); ++ir) {
        const double tn = rho[ir] / fr.dstar;
        const double theta_c = 2.0 * std::atan(tn);
        double inner = 0;
        for (int ia = 0; ia < q.plane_alpha; ++ia) {
          const double a = walpha * (ia + 0.5);
          const Vec3 omega = std::cos(a) * fr.e1 + std::sin(a) * fr.e2;
          inner += integrand(vp, vs, vp + rho[ir] * omega, theta_c);
        }
        acc.add(lvl[ir], w[ir] * walpha * inner * outer.w * star.w);
      }
    }
    slot[io] = acc;
  });

  LevelSums total(L);
  for (const auto& sl : slot) total += sl;
  return total;
}

// Deterministic sweep of one dyadic band in the plane geometry: the band is
// 2^{-j-1} < rho <= 2^{-j} intersected with rho <= dstar (theta_c <= pi/2).
template <class Integrand>
double dyadic_plane_sweep(const KernelParams& k, const QuadratureSpec& q, int j,
                          Integrand&& integrand) {
  const BallGrid outer(q.outer_radius, q.outer_spacing);
  const BallGrid star(q.star_radius, q.star_spacing);
  const double walpha = 2.0 * pi / q.plane_alpha;
  const DyadicIndex band{j};

  return parallel_sum(outer.node.size(), [&](std::size_t io) {
    double acc = 0;
    const Vec3 vp = outer.node[io];
    std::vector<double> rho, w;
    for (const Vec3& vs : star.node) {
      if (norm2(vp - vs) < 1e-24) continue;
      const PlaneFrame fr(vp, vs);
      const double lo_rho = band.band_lo();
      const double hi_rho = std::min(band.band_hi(), fr.dstar);
      if (hi_rho <= lo_rho) continue;
      // convert the rho band to theta_c limits
      const double lo = 2.0 * std::atan(lo_rho / fr.dstar);
      const double hi = 2.0 * std::atan(hi_rho / fr.dstar);
      plane_radial_nodes(fr.dstar, lo, hi, 4 * q.plane_per_decade, rho, w);
      for (std::size_t ir = 0; ir < rho.size(); ++ir) {
        const double theta_c = 2.0 * std::atan(rho[ir] / fr.dstar);
        double inner = 0;
        for (int ia = 0; ia < q.plane_alpha; ++ia) {
          const double a = walpha * (ia + 0.5);
          const Vec3 omega = std::cos(a) * fr.e1 + std::sin(a) * fr.e2;
          inner += integrand(vp, vs, vp + rho[ir] * omega, theta_c);
        }
        acc += w[ir] * walpha * inner * outer.w * star.w;
      }
    }
    return acc;
  });
}

// Per-sample Monte Carlo machinery: proposals v ~ N(0, var_v I),
// v_* ~ N(0, var_s I), theta ~ theta^{-2s} on [eps_fine, pi/2], alpha uniform.
struct McSetup {
  double var_v = 3.0;
  double var_s = 2.0;
  double s = 0.25;
  double eps_fine = 2.5e-3;

  double theta_from_uniform(double u) const {
    const double hi = 0.5 * pi;
    if (std::abs(s - 0.5) < 1e-12) {
      return eps_fine * std::pow(hi / eps_fine, u);
    }
    const double p = 1.0 - 2.0 * s;
    const double a = std::pow(eps_fine, p), b = std::pow(hi, p);
    return std::pow(a + u * (b - a), 1.0 / p);
  }
  // density of the theta proposal
  double theta_pdf(double th) const {
    const double hi = 0.5 * pi;
    if (std::abs(s - 0.5) < 1e-12) return 1.0 / (th * std::log(hi / eps_fine));
    const double p = 1.0 - 2.0 * s;
    const double z = (std::pow(hi, p) - std::pow(eps_fine, p)) / p;
    return std::pow(th, -2.0 * s) / z;
  }
  static double gauss_pdf(const Vec3& x, double var) {
    return std::pow(2.0 * pi * var, -1.5) * std::exp(-0.5 * norm2(x) / var);
  }
};

// Runs N counter-indexed samples of `estimate` (which fills per-level values
// x[0..L-1]); returns level means and the MC variance of the extrapolated
// combination. Deterministic for any thread count.
template <class Estimate>
void mc_sweep(long long n, int levels, double s, Estimate&& estimate,
              std::vector<double>& level_means, double& extrap_mean, double& extrap_stderr) {
  const double beta = 2.0 - 2.0 * s;
  const double fac = std::pow(2.0, beta) - 1.0;
  const long long chunks = 512;
  const long long per = (n + chunks - 1) / chunks;
  struct Acc {
    std::vector<double> lv;
    double y = 0, y2 = 0;
  };
  std::vector<Acc> slot(chunks);
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
    Acc a;
    a.lv.assign(levels, 0.0);
    std::vector<double> x(levels);
    const long long lo = c * per, hi = std::min<long long>(n, (c + 1) * per);
    for (long long i = lo; i < hi; ++i) {
      for (int l = 0; l < levels; ++l) x[l] = 0;
      estimate(static_cast<std::uint64_t>(i), x);
      for (int l = 0; l < levels; ++l) a.lv[l] += x[l];
      const double y = x[levels - 1] + (x[levels - 1] - x[levels - 2]) / fac;
      a.y += y;
      a.y2 += y * y;
    }
    slot[c] = std::move(a);
  });
  level_means.assign(levels, 0.0);
  double ys = 0, y2s = 0;
  for (const auto& a : slot) {
    for (int l = 0; l < levels; ++l) level_means[l] += a.lv[l];
    ys += a.y;
    y2s += a.y2;
  }
  for (int l = 0; l < levels; ++l) level_means[l] /= static_cast<double>(n);
  extrap_mean = ys / static_cast<double>(n);
  const double var = std::max(0.0, y2s / n - extrap_mean * extrap_mean);
  extrap_stderr = std::sqrt(var / static_cast<double>(n));
}

}  // namespace tri_detail

// ---------------------------------------------------------------------------
// sigma representation: <Gamma(g,h), f> = int B M_* (g'_* h' - g_* h) f
// ---------------------------------------------------------------------------

template <class G, class H, class F>
TrilinearReport gamma_sigma(const G& g, const H& h, const F& f, const KernelParams& k,
                            const QuadratureSpec& q, Backend backend = Backend::product) {
  q.validate();
  TrilinearReport rep;
  rep.representation = Representation::sigma;
  rep.backend = backend;
  rep.seed = q.seed;

  if (backend == Backend::product) {
    auto sums = tri_detail::sigma_sweep(k, q, [&](const Vec3& v, const Vec3& vs, const Vec3& vp,
                                                  const Vec3& vsp) {
      return sqrt_maxwellian_value(vs) * (g(vsp) * h(vp) - g(vs) * h(v)) * f(v);
    });
    rep.value = extrapolate_cutoff(sums.sum, k.s, &rep.error_estimate);
    return rep;
  }

  tri_detail::McSetup mc;
  mc.s = k.s;
  mc.eps_fine = q.eps_theta;
  const std::vector<double> eps = cutoff_levels(q);
  CounterRng rng{q.seed, 0x516aa};
  std::vector<double> levels;
  tri_detail::mc_sweep(
      q.mc_samples, q.eps_levels, k.s,
      [&](std::uint64_t i, std::vector<double>& x) {
        const Vec3 v = rng.normal3(8 * i) * std::sqrt(mc.var_v);
        const Vec3 vs = rng.normal3(8 * i + 3) * std::sqrt(mc.var_s);
        const double th = mc.theta_from_uniform(rng.uniform(8 * i + 6));
        const double alpha = rng.uniform(8 * i + 7, 0.0, 2.0 * pi);
        const Vec3 rel = v - vs;
        const double r = norm(rel);
        if (r < 1e-12) return;
        const Vec3 kdir = rel / r;
        Vec3 e1, e2;
        orthonormal_frame(kdir, e1, e2);
        const Vec3 sigma = std::cos(th) * kdir + std::sin(th) * (std::cos(alpha) * e1 + std::sin(alpha) * e2);
        const Vec3 mid = 0.5 * (v + vs);
        const Vec3 vp = mid + (0.5 * r) * sigma;
        const Vec3 vsp = mid - (0.5 * r) * sigma;
        const double dens = tri_detail::McSetup::gauss_pdf(v, mc.var_v) *
                            tri_detail::McSetup::gauss_pdf(vs, mc.var_s) * mc.theta_pdf(th) /
                            (2.0 * pi);
        const double integrand = phi_kinetic(k, r) * std::pow(th, -1.0 - 2.0 * k.s) *
                                 sqrt_maxwellian_value(vs) * (g(vsp) * h(vp) - g(vs) * h(v)) *
                                 f(v);
        const double w = integrand / dens;
        for (int l = 0; l < q.eps_levels; ++l)
          if (th >= eps[l]) x[l] = w;
      },
      levels, rep.value, rep.error_estimate);
  // add the cutoff residual on top of the MC error bar
  double cut_err = 0;
  extrapolate_cutoff(levels, k.s, &cut_err, rep.value, /*strict=*/false);
  rep.error_estimate += cut_err;
  return rep;
}

// ---------------------------------------------------------------------------
// dual representation (differences fall on h):
// <Gamma(g,h), f> = 4 int dv* dv' int_{E} dpi_v  b(cos theta_c) g_* f' /
//                   (|v-v_*| |v'-v_*|) [Phi(|v-v_*|) M'_* h
//                                       - Phi(|v'-v_*|) |v'-v_*|^3/|v-v_*|^3 M_* h']
// ---------------------------------------------------------------------------

namespace tri_detail {

// Common dual-form integrand; v lives on the plane through vp.
template <class G, class H, class F>
double dual_integrand(const G& g, const H& h, const F& f, const KernelParams& k, const Vec3& vp,
                      const Vec3& vs, const Vec3& v, double theta_c) {
  const double dstar = norm(vp - vs);
  const double rho2 = norm2(v - vp);
  const double rv2 = dstar * dstar + rho2;  // |v - v_*|^2 by orthogonality
  const double rv = std::sqrt(rv2);
  const double b = std::pow(theta_c, -1.0 - 2.0 * k.s) / std::sin(theta_c);
  const Vec3 vsp = v + vs - vp;  // pre-collision partner on this geometry
  const double gain = phi_kinetic(k, rv) * sqrt_maxwellian_value(vsp) * h(v);
  const double loss = phi_kinetic(k, dstar) * (dstar * dstar * dstar) / (rv2 * rv) *
                      sqrt_maxwellian_value(vs) * h(vp);
  return 4.0 * b * g(vs) * f(vp) * (gain - loss) / (rv * dstar);
}

}  // namespace tri_detail

template <class G, class H, class F>
TrilinearReport gamma_dual(const G& g, const H& h, const F& f, const KernelParams& k,
                           const QuadratureSpec& q, Backend backend = Backend::product) {
  q.validate();
  TrilinearReport rep;
  rep.representation = Representation::dual;
  rep.backend = backend;
  rep.seed = q.seed;

  if (backend == Backend::product) {
    auto sums = tri_detail::plane_sweep(k, q, [&](const Vec3& vp, const Vec3& vs, const Vec3& v,
                                                  double theta_c) {
      return tri_detail::dual_integrand(g, h, f, k, vp, vs, v, theta_c);
    });
    rep.value = extrapolate_cutoff(sums.sum, k.s, &rep.error_estimate);
    return rep;
  }

  tri_detail::McSetup mc;
  mc.s = k.s;
  mc.eps_fine = q.eps_theta;
  mc.var_v = 3.0;   // v' proposal
  mc.var_s = 2.5;   // v_* proposal (g_* has suite-scale Gaussian decay)
  const std::vector<double> eps = cutoff_levels(q);
  CounterRng rng{q.seed, 0xd0a1};
  std::vector<double> levels;
  tri_detail::mc_sweep(
      q.mc_samples, q.eps_levels, k.s,
      [&](std::uint64_t i, std::vector<double>& x) {
        const Vec3 vp = rng.normal3(8 * i) * std::sqrt(mc.var_v);
        const Vec3 vs = rng.normal3(8 * i + 3) * std::sqrt(mc.var_s);
        if (norm2(vp - vs) < 1e-24) return;
        const double th = mc.theta_from_uniform(rng.uniform(8 * i + 6));
        const double alpha = rng.uniform(8 * i + 7, 0.0, 2.0 * pi);
        const tri_detail::PlaneFrame fr(vp, vs);
        const double tn = std::tan(0.5 * th);
        const double rho = fr.dstar * tn;
        const Vec3 omega = std::cos(alpha) * fr.e1 + std::sin(alpha) * fr.e2;
        const Vec3 v = vp + rho * omega;
        // plane measure: rho drho dalpha with drho = dstar/2 sec^2(th/2) dth
        const double measure = rho * fr.dstar * 0.5 * (1.0 + tn * tn);
        const double dens = tri_detail::McSetup::gauss_pdf(vp, mc.var_v) *
                            tri_detail::McSetup::gauss_pdf(vs, mc.var_s) * mc.theta_pdf(th) /
                            (2.0 * pi);
        const double w =
            tri_detail::dual_integrand(g, h, f, k, vp, vs, v, th) * measure / dens;
        for (int l = 0; l < q.eps_levels; ++l)
          if (th >= eps[l]) x[l] = w;
      },
      levels, rep.value, rep.error_estimate);
  double cut_err = 0;
  extrapolate_cutoff(levels, k.s, &cut_err, rep.value, /*strict=*/false);
  rep.error_estimate += cut_err;
  return rep;
}

// ---------------------------------------------------------------------------
// Dyadic pieces T^j_{+,-,*} and the Carleman-plus representation
// ---------------------------------------------------------------------------

enum class TPieceKind { plus_sigma, plus_carleman, minus, star };

template <class G, class H, class F>
double t_piece(TPieceKind kind, int j, const G& g, const H& h, const F& f,
               const KernelParams& k, const QuadratureSpec& q) {
  q.validate();
  switch (kind) {
    case TPieceKind::plus_sigma:
      return tri_detail::dyadic_sigma_sweep(
          k, q, j, [&](const Vec3& v, const Vec3& vs, const Vec3& vp, const Vec3& vsp) {
            return g(vs) * h(v) * sqrt_maxwellian_value(vsp) * f(vp);
          });
    case TPieceKind::minus:
      return tri_detail::dyadic_sigma_sweep(
          k, q, j, [&](const Vec3& v, const Vec3& vs, const Vec3& vp, const Vec3&) {
            (void)vp;
            return g(vs) * h(v) * sqrt_maxwellian_value(vs) * f(v);
          });
    case TPieceKind::plus_carleman:
      return tri_detail::dyadic_plane_sweep(
          k, q, j, [&](const Vec3& vp, const Vec3& vs, const Vec3& v, double theta_c) {
            const double dstar = norm(vp - vs);
            const double rv = std::sqrt(dstar * dstar + norm2(v - vp));
            const double b = std::pow(theta_c, -1.0 - 2.0 * k.s) / std::sin(theta_c);
            const Vec3 vsp = v + vs - vp;
            return 4.0 * phi_kinetic(k, rv) * b * g(vs) * f(vp) *
                   sqrt_maxwellian_value(vsp) * h(v) / (rv * dstar);
          });
    case TPieceKind::star:
      return tri_detail::dyadic_plane_sweep(
          k, q, j, [&](const Vec3& vp, const Vec3& vs, const Vec3& v, double theta_c) {
            const double dstar = norm(vp - vs);
            const double rv2 = dstar * dstar + norm2(v - vp);
            const double b = std::pow(theta_c, -1.0 - 2.0 * k.s) / std::sin(theta_c);
            return 4.0 * phi_kinetic(k, dstar) * b * g(vs) * f(vp) *
                   sqrt_maxwellian_value(vs) * h(vp) * dstar * dstar / (rv2 * rv2);
          });
  }
  throw InvalidInput("t_piece: unknown kind");
}

// Pointwise-paired dyadic differences (the cancellation structure lives in
// the integrand, so one quadrature serves both terms).
template <class G, class H, class F>
double t_plus_minus_difference(int j, const G& g, const H& h, const F& f, const KernelParams& k,
                               const QuadratureSpec& q) {
  return tri_detail::dyadic_sigma_sweep(
      k, q, j, [&](const Vec3& v, const Vec3& vs, const Vec3& vp, const Vec3& vsp) {
        return g(vs) * h(v) *
               (sqrt_maxwellian_value(vsp) * f(vp) - sqrt_maxwellian_value(vs) * f(v));
      });
}

template <class G, class H, class F>
double t_plus_star_difference(int j, const G& g, const H& h, const F& f, const KernelParams& k,
                              const QuadratureSpec& q) {
  return tri_detail::dyadic_plane_sweep(
      k, q, j, [&](const Vec3& vp, const Vec3& vs, const Vec3& v, double theta_c) {
        const double dstar = norm(vp - vs);
        const double rv2 = dstar * dstar + norm2(v - vp);
        const double rv = std::sqrt(rv2);
        const double b = std::pow(theta_c, -1.0 - 2.0 * k.s) / std::sin(theta_c);
        const Vec3 vsp = v + vs - vp;
        const double gain = phi_kinetic(k, rv) * sqrt_maxwellian_value(vsp) * h(v) / (rv * dstar);
        const double loss = phi_kinetic(k, dstar) * sqrt_maxwellian_value(vs) * h(vp) * dstar *
                            dstar / (rv2 * rv2);
        return 4.0 * b * g(vs) * f(vp) * (gain - loss);
      });
}

namespace tri_detail {

// Band-restricted Monte Carlo for T^j pieces. The theta (resp. theta_c)
// window is computed per draw from the band and sampled log-uniformly.
template <class Integrand>
double band_mc_sigma(const KernelParams& k, long long n, const CounterRng& rng, int j,
                     Integrand&& integrand, double& stderr_out) {
  McSetup mc;
  double mean = 0, var = 0;
  const long long chunks = 256;
  const long long per = (n + chunks - 1) / chunks;
  std::vector<std::pair<double, double>> slot(chunks, {0, 0});
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
    double s1 = 0, s2 = 0;
    const long long lo = c * per, hi = std::min<long long>(n, (c + 1) * per);
    for (long long i = lo; i < hi; ++i) {
      const std::uint64_t b = 8 * static_cast<std::uint64_t>(i);
      const Vec3 v = rng.normal3(b) * std::sqrt(mc.var_v);
      const Vec3 vs = rng.normal3(b + 3) * std::sqrt(mc.var_s);
      const Vec3 rel = v - vs;
      const double r = norm(rel);
      double tl, th_;
      if (r < 1e-12 || !dyadic_theta_window(j, r, tl, th_)) continue;
      const double u = rng.uniform(b + 6);
      const double lg = std::log(th_ / tl);
      const double th = tl * std::exp(u * lg);
      const double p_theta = 1.0 / (th * lg);
      const double alpha = rng.uniform(b + 7, 0.0, 2.0 * pi);
      const Vec3 kdir = rel / r;
      Vec3 e1, e2;
      orthonormal_frame(kdir, e1, e2);
      const Vec3 sigma =
          std::cos(th) * kdir + std::sin(th) * (std::cos(alpha) * e1 + std::sin(alpha) * e2);
      const Vec3 mid = 0.5 * (v + vs);
      const Vec3 vp = mid + (0.5 * r) * sigma;
      const Vec3 vsp = mid - (0.5 * r) * sigma;
      const double dens = McSetup::gauss_pdf(v, mc.var_v) * McSetup::gauss_pdf(vs, mc.var_s) *
                          p_theta / (2.0 * pi);
      const double w = phi_kinetic(k, r) * std::pow(th, -1.0 - 2.0 * k.s) *
                       integrand(v, vs, vp, vsp) / dens;
      s1 += w;
      s2 += w * w;
    }
    slot[c] = {s1, s2};
  });
  double s1 = 0, s2 = 0;
  for (auto& p : slot) {
    s1 += p.first;
    s2 += p.second;
  }
  mean = s1 / static_cast<double>(n);
  var = std::max(0.0, s2 / n - mean * mean);
  stderr_out = std::sqrt(var / static_cast<double>(n));
  return mean;
}

template <class Integrand>
double band_mc_plane(const KernelParams& k, long long n, const CounterRng& rng, int j,
                     Integrand&& integrand, double& stderr_out) {
  McSetup mc;
  mc.var_v = 3.0;
  mc.var_s = 2.5;
  const DyadicIndex band{j};
  const long long chunks = 256;
  const long long per = (n + chunks - 1) / chunks;
  std::vector<std::pair<double, double>> slot(chunks, {0, 0});
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
    double s1 = 0, s2 = 0;
    const long long lo = c * per, hi = std::min<long long>(n, (c + 1) * per);
    for (long long i = lo; i < hi; ++i) {
      const std::uint64_t b = 8 * static_cast<std::uint64_t>(i);
      const Vec3 vp = rng.normal3(b) * std::sqrt(mc.var_v);
      const Vec3 vs = rng.normal3(b + 3) * std::sqrt(mc.var_s);
      if (norm2(vp - vs) < 1e-24) continue;
      const PlaneFrame fr(vp, vs);
      const double lo_rho = band.band_lo();
      const double hi_rho = std::min(band.band_hi(), fr.dstar);
      if (hi_rho <= lo_rho) continue;
      const double tl = 2.0 * std::atan(lo_rho / fr.dstar);
      const double th_ = 2.0 * std::atan(hi_rho / fr.dstar);
      const double u = rng.uniform(b + 6);
      const double lg = std::log(th_ / tl);
      const double th = tl * std::exp(u * lg);
      const double p_theta = 1.0 / (th * lg);
      const double alpha = rng.uniform(b + 7, 0.0, 2.0 * pi);
      const double tn = std::tan(0.5 * th);
      const double rho = fr.dstar * tn;
      const Vec3 omega = std::cos(alpha) * fr.e1 + std::sin(alpha) * fr.e2;
      const double measure = rho * fr.dstar * 0.5 * (1.0 + tn * tn);
      const double dens = McSetup::gauss_pdf(vp, mc.var_v) * McSetup::gauss_pdf(vs, mc.var_s) *
                          p_theta / (2.0 * pi);
      const double w = integrand(vp, vs, vp + rho * omega, th) * measure / dens;
      s1 += w;
      s2 += w * w;
    }
    slot[c] = {s1, s2};
  });
  double s1 = 0, s2 = 0;
  for (auto& p : slot) {
    s1 += p.first;
    s2 += p.second;
  }
  const double mean = s1 / static_cast<double>(n);
  const double var = std::max(0.0, s2 / n - mean * mean);
  stderr_out = std::sqrt(var / static_cast<double>(n));
  return mean;
}

}  // namespace tri_detail

// Carleman-plus representation: sum over bands of T^j_+ in Carleman form
// minus T^j_- in sigma form, with a geometric tail estimate from the
// cancellation decay 2^{(2s-1)j}.
template <class G, class H, class F>
TrilinearReport gamma_carleman(const G& g, const H& h, const F& f, const KernelParams& k,
                               const QuadratureSpec& q, Backend backend = Backend::product,
                               int j_min = -6, int j_max = 8) {
  q.validate();
  TrilinearReport rep;
  rep.representation = Representation::carleman;
  rep.backend = backend;
  rep.seed = q.seed;

  double value = 0, err2 = 0, last = 0;

  if (backend == Backend::product) {
    // per-band quadrature error proxy: rerun the dominant bands with a
    // coarser outer grid and compare
    double dominant = 0, dominant_coarse = 0;
    QuadratureSpec qc = q;
    qc.outer_spacing *= 1.4;
    qc.star_spacing *= 1.4;
    for (int j = j_min; j <= j_max; ++j) {
      const double piece = t_piece(TPieceKind::plus_carleman, j, g, h, f, k, q) -
                           t_piece(TPieceKind::minus, j, g, h, f, k, q);
      value += piece;
      last = piece;
      if (j >= 0 && j <= 2) {
        dominant += piece;
        dominant_coarse += t_piece(TPieceKind::plus_carleman, j, g, h, f, k, qc) -
                           t_piece(TPieceKind::minus, j, g, h, f, k, qc);
      }
    }
    const double rel = std::abs(dominant - dominant_coarse) /
                       std::max(std::abs(dominant), 1e-300);
    err2 = std::pow(rel * std::abs(value), 2);
  } else {
    CounterRng rng{q.seed, 0xca71e};
    // allocate the sample budget towards fine bands, where the +/- difference
    // shrinks relative to the pieces themselves
    std::vector<double> share;
    double tot = 0;
    for (int j = j_min; j <= j_max; ++j) {
      const double wj = std::pow(4.0, std::max(0, j));
      share.push_back(wj);
      tot += wj;
    }
    for (int j = j_min; j <= j_max; ++j) {
      const long long nj = std::max<long long>(
          5000, static_cast<long long>(q.mc_samples * share[j - j_min] / tot));
      double se_p = 0, se_m = 0;
      const double plus = tri_detail::band_mc_plane(
          k, nj, rng.fork(2 * j + 1000), j,
          [&](const Vec3& vpp, const Vec3& vs, const Vec3& v, double theta_c) {
            const double dstar = norm(vpp - vs);
            const double rv = std::sqrt(dstar * dstar + norm2(v - vpp));
            const double b = std::pow(theta_c, -1.0 - 2.0 * k.s) / std::sin(theta_c);
            const Vec3 vsp = v + vs - vpp;
            return 4.0 * phi_kinetic(k, rv) * b * g(vs) * f(vpp) *
                   sqrt_maxwellian_value(vsp) * h(v) / (rv * dstar);
          },
          se_p);
      const double minus = tri_detail::band_mc_sigma(
          k, nj, rng.fork(2 * j + 1001), j,
          [&](const Vec3& v, const Vec3& vs, const Vec3&, const Vec3&) {
            return g(vs) * h(v) * sqrt_maxwellian_value(vs) * f(v);
          },
          se_m);
      const double piece = plus - minus;
      value += piece;
      last = piece;
      err2 += se_p * se_p + se_m * se_m;
    }
  }

  const double ratio = std::pow(2.0, 2.0 * k.s - 1.0);
  const double tail = std::abs(last) * ratio / std::max(1e-12, 1.0 - ratio);
  rep.value = value;
  rep.error_estimate = std::sqrt(err2) + tail;
  return rep;
}

// Front door used by the CLI: evaluate one representation.
template <class G, class H, class F>
TrilinearReport gamma_form(Representation r, const G& g, const H& h, const F& f,
                           const KernelParams& k, const QuadratureSpec& q, Backend backend) {
  switch (r) {
    case Representation::sigma: return gamma_sigma(g, h, f, k, q, backend);
    case Representation::dual: return gamma_dual(g, h, f, k, q, backend);
    case Representation::carleman: return gamma_carleman(g, h, f, k, q, backend);
  }
  throw InvalidInput("gamma_form: unknown representation");
}

}  // namespace ncb
