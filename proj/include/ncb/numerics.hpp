#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "ncb/base.hpp"

namespace ncb {

struct Quad1D {
  std::vector<double> x, w;
};

// Gauss-Legendre nodes/weights on [-1,1] via Newton on the Legendre recurrence.
inline const Quad1D& gauss_legendre(int n) {
  static std::map<int, Quad1D> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Quad1D q;
  q.x.resize(n);
  q.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    q.x[n - 1 - i] = x;
    q.w[n - 1 - i] = 2.0 / ((1 - x * x) * dp * dp);
  }
  return cache.emplace(n, std::move(q)).first->second;
}

// Gauss-Legendre on [a,b].
inline Quad1D gauss_legendre(int n, double a, double b) {
  const Quad1D& ref = gauss_legendre(n);
  Quad1D q;
  q.x.resize(n);
  q.w.resize(n);
  for (int i = 0; i < n; ++i) {
    q.x[i] = 0.5 * (a + b) + 0.5 * (b - a) * ref.x[i];
    q.w[i] = 0.5 * (b - a) * ref.w[i];
  }
  return q;
}

// Composite panels, geometric in [a,b] (log-spaced panel edges), GL per panel.
inline Quad1D log_panels(double a, double b, int panels, int nodes_per_panel) {
  Quad1D q;
  const double ratio = std::pow(b / a, 1.0 / panels);
  double lo = a;
  for (int p = 0; p < panels; ++p) {
    const double hi = (p + 1 == panels) ? b : lo * ratio;
    Quad1D part = gauss_legendre(nodes_per_panel, lo, hi);
    q.x.insert(q.x.end(), part.x.begin(), part.x.end());
    q.w.insert(q.w.end(), part.w.begin(), part.w.end());
    lo = hi;
  }
  return q;
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                                   double b, double fa, double fm, double fb, double whole,
                                   double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15 * tol) return left + right + delta / 15;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-12, int depth = 48) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6 * (fa + 4 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

// Least-squares slope of y against x.
inline double regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Solves A x = b in place by partial-pivot LU; A is n x n row-major.
inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  std::vector<int> piv(n);
  for (int i = 0; i < n; ++i) piv[i] = i;
  for (int col = 0; col < n; ++col) {
    int best = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[best * n + col])) best = r;
    if (std::abs(a[best * n + col]) < 1e-300)
      throw NumericalFailure("solve_dense: singular matrix");
    if (best != col) {
      for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[best * n + c]);
      std::swap(b[col], b[best]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double m = a[r * n + col] / a[col * n + col];
      if (m == 0) continue;
      for (int c = col; c < n; ++c) a[r * n + c] -= m * a[col * n + c];
      b[r] -= m * b[col];
    }
  }
  std::vector<double> x(n);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[r * n + c] * x[c];
    x[r] = s / a[r * n + r];
  }
  return x;
}

// Largest |eigenvalue| of a symmetric 4x4 (cyclic Jacobi).
inline double spectral_norm_sym4(double m[4][4]) {
  for (int sweep = 0; sweep < 16; ++sweep) {
    double off = 0;
    for (int p = 0; p < 4; ++p)
      for (int q = p + 1; q < 4; ++q) off += m[p][q] * m[p][q];
    if (off < 1e-28) break;
    for (int p = 0; p < 4; ++p)
      for (int q = p + 1; q < 4; ++q) {
        if (std::abs(m[p][q]) < 1e-300) continue;
        const double theta = 0.5 * std::atan2(2 * m[p][q], m[q][q] - m[p][p]);
        const double c = std::cos(theta), s = std::sin(theta);
        for (int k = 0; k < 4; ++k) {
          const double mkp = m[k][p], mkq = m[k][q];
          m[k][p] = c * mkp - s * mkq;
          m[k][q] = s * mkp + c * mkq;
        }
        for (int k = 0; k < 4; ++k) {
          const double mpk = m[p][k], mqk = m[q][k];
          m[p][k] = c * mpk - s * mqk;
          m[q][k] = s * mpk + c * mqk;
        }
      }
  }
  double best = 0;
  for (int i = 0; i < 4; ++i) best = std::max(best, std::abs(m[i][i]));
  return best;
}

// log I0(x), stable for large argument.
inline double log_bessel_i0(double x) {
  x = std::abs(x);
  if (x < 25.0) return std::log(std::cyl_bessel_i(0.0, x));
  const double r = 1.0 / x;
  // Asymptotic series I0(x) ~ e^x/sqrt(2 pi x) (1 + 1/8x + 9/128x^2 + ...).
  return x - 0.5 * std::log(2 * pi * x) + std::log1p(r * (0.125 + r * (0.0703125 + r * 0.0732421875)));
}

}  // namespace ncb
