#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "ncb/base.hpp"
#include "ncb/parallel.hpp"

namespace ncb {

enum class QuadratureRule { trapezoid, gauss_legendre };

// Tensor grid on [-R, R]^3 with per-axis quadrature weights.
// n points per axis (odd, so the origin is a node in trapezoid mode).
class VelocityGrid {
 public:
  VelocityGrid(double R, int n, QuadratureRule rule = QuadratureRule::trapezoid)
      : R_(R), n_(n), rule_(rule) {
    if (!(R > 0)) throw InvalidInput("VelocityGrid: R must be positive");
    if (n < 4) throw InvalidInput("VelocityGrid: n too small");
    if (rule == QuadratureRule::trapezoid && n % 2 == 0)
      throw InvalidInput("VelocityGrid: trapezoid grid expects odd n");
    axis_.resize(n);
    axis_w_.resize(n);
    if (rule == QuadratureRule::trapezoid) {
      const double h = 2 * R / (n - 1);
      for (int i = 0; i < n; ++i) {
        axis_[i] = -R + i * h;
        axis_w_[i] = (i == 0 || i == n - 1) ? 0.5 * h : h;
      }
      spacing_ = h;
    } else {
      // Gauss-Legendre per axis (synthesized locally; numerics.hpp is not a
      // dependency of this header).
      std::vector<double> x(n), w(n);
      {
        for (int i = 0; i < n; ++i) {
          double xi = std::cos(pi * (i + 0.75) / (n + 0.5));
          double dp = 0;
          for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = xi;
            for (int k = 2; k <= n; ++k) {
              const double p2 = ((2 * k - 1) * xi * p1 - (k - 1) * p0) / k;
              p0 = p1;
              p1 = p2;
            }
            dp = n * (xi * p1 - p0) / (xi * xi - 1);
            const double dx = p1 / dp;
            xi -= dx;
            if (std::abs(dx) < 1e-15) break;
          }
          x[n - 1 - i] = xi;
          w[n - 1 - i] = 2.0 / ((1 - xi * xi) * dp * dp);
        }
      }
      for (int i = 0; i < n; ++i) {
        axis_[i] = R * x[i];
        axis_w_[i] = R * w[i];
      }
      spacing_ = 2 * R / n;  // nominal
    }
  }

  double R() const { return R_; }
  int n() const { return n_; }
  QuadratureRule rule() const { return rule_; }
  double spacing() const { return spacing_; }
  std::size_t size() const { return static_cast<std::size_t>(n_) * n_ * n_; }

  double axis(int i) const { return axis_[i]; }
  double axis_weight(int i) const { return axis_w_[i]; }

  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(ix) * n_ + iy) * n_ + iz;
  }
  Vec3 node(std::size_t flat) const {
    const int iz = static_cast<int>(flat % n_);
    const int iy = static_cast<int>((flat / n_) % n_);
    const int ix = static_cast<int>(flat / (static_cast<std::size_t>(n_) * n_));
    return {axis_[ix], axis_[iy], axis_[iz]};
  }
  double weight(std::size_t flat) const {
    const int iz = static_cast<int>(flat % n_);
    const int iy = static_cast<int>((flat / n_) % n_);
    const int ix = static_cast<int>(flat / (static_cast<std::size_t>(n_) * n_));
    return axis_w_[ix] * axis_w_[iy] * axis_w_[iz];
  }

  bool same_layout(const VelocityGrid& o) const {
    return R_ == o.R_ && n_ == o.n_ && rule_ == o.rule_;
  }

 private:
  double R_;
  int n_;
  QuadratureRule rule_;
  double spacing_;
  std::vector<double> axis_, axis_w_;
};

// Scalar field sampled on a VelocityGrid. Evaluation between nodes uses
// tricubic (per-axis Lagrange cubic) interpolation; outside the box it is 0.
class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(std::shared_ptr<const VelocityGrid> grid)
      : grid_(std::move(grid)), values_(grid_->size(), 0.0) {}
  GridFunction(std::shared_ptr<const VelocityGrid> grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_->size())
      throw InvalidInput("GridFunction: value count does not match grid");
  }

  const VelocityGrid& grid() const { return *grid_; }
  std::shared_ptr<const VelocityGrid> grid_ptr() const { return grid_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  template <class F>
  static GridFunction sample(std::shared_ptr<const VelocityGrid> grid, F&& f) {
    GridFunction g(grid);
    const VelocityGrid& gr = *grid;
    parallel_for(gr.size(), [&](std::size_t i) { g.values_[i] = f(gr.node(i)); });
    return g;
  }

  // Tricubic interpolation; requires a trapezoid (uniform) grid.
  double operator()(const Vec3& v) const {
    const VelocityGrid& g = *grid_;
    const double h = g.spacing();
    const double R = g.R();
    const int n = g.n();
    double wts[3][4];
    int base[3];
    for (int a = 0; a < 3; ++a) {
      const double t = (v[a] + R) / h;
      if (t < -0.5 || t > n - 0.5) return 0.0;
      int i1 = static_cast<int>(std::floor(t));
      double fr = t - i1;
      // shift the 4-point stencil inside the domain near edges
      int i0 = i1 - 1;
      if (i0 < 0) {
        fr += i0;
        i0 = 0;
      }
      if (i0 > n - 4) {
        fr += i0 - (n - 4);
        i0 = n - 4;
      }
      base[a] = i0;
      // Lagrange cubic weights at offsets {0,1,2,3}, sample position 1+fr
      const double x = 1.0 + fr;
      wts[a][0] = -(x - 1) * (x - 2) * (x - 3) / 6.0;
      wts[a][1] = x * (x - 2) * (x - 3) / 2.0;
      wts[a][2] = -x * (x - 1) * (x - 3) / 2.0;
      wts[a][3] = x * (x - 1) * (x - 2) / 6.0;
    }
    double acc = 0;
    for (int ix = 0; ix < 4; ++ix)
      for (int iy = 0; iy < 4; ++iy) {
        const double wxy = wts[0][ix] * wts[1][iy];
        const std::size_t row = g.index(base[0] + ix, base[1] + iy, base[2]);
        const double* p = values_.data() + row;
        acc += wxy * (wts[2][0] * p[0] + wts[2][1] * p[1] + wts[2][2] * p[2] + wts[2][3] * p[3]);
      }
    return acc;
  }

 private:
  std::shared_ptr<const VelocityGrid> grid_;
  std::vector<double> values_;
};

inline double integrate(const GridFunction& f) {
  const VelocityGrid& g = f.grid();
  double acc = 0;
  for (std::size_t i = 0; i < g.size(); ++i) acc += g.weight(i) * f[i];
  return acc;
}

// (integral of <v>^beta f^2)^{1/2}
inline double weighted_l2(const GridFunction& f, double beta) {
  const VelocityGrid& g = f.grid();
  double acc = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double w = std::pow(1.0 + norm2(g.node(i)), 0.5 * beta);
    acc += g.weight(i) * w * f[i] * f[i];
  }
  return std::sqrt(acc);
}

inline double maxwellian_value(const Vec3& v) {
  return std::pow(2 * pi, -1.5) * std::exp(-0.5 * norm2(v));
}
inline double sqrt_maxwellian_value(const Vec3& v) {
  return std::pow(2 * pi, -0.75) * std::exp(-0.25 * norm2(v));
}

inline GridFunction maxwellian(std::shared_ptr<const VelocityGrid> grid) {
  return GridFunction::sample(std::move(grid), [](const Vec3& v) { return maxwellian_value(v); });
}
inline GridFunction sqrt_maxwellian(std::shared_ptr<const VelocityGrid> grid) {
  return GridFunction::sample(std::move(grid), [](const Vec3& v) { return sqrt_maxwellian_value(v); });
}

// ---------------------------------------------------------------------------
// Field file I/O: one JSON header line, then raw little-endian float64 values
// in row-major x,y,z order. Round trips are bit exact.
// ---------------------------------------------------------------------------

inline void save_field(const std::string& path, const GridFunction& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("save_field: cannot open " + path);
  char header[256];
  std::snprintf(header, sizeof(header),
                "{\"format\":\"gf-v1\",\"R\":%.17g,\"n\":%d,\"order\":\"row-major x,y,z\"}\n",
                f.grid().R(), f.grid().n());
  out << header;
  out.write(reinterpret_cast<const char*>(f.values().data()),
            static_cast<std::streamsize>(f.values().size() * sizeof(double)));
  if (!out) throw NumericalFailure("save_field: short write to " + path);
}

inline GridFunction load_field(const std::string& path,
                               std::shared_ptr<const VelocityGrid> grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("load_field: cannot open " + path);
  std::string header;
  if (!std::getline(in, header) || header.find("\"format\":\"gf-v1\"") == std::string::npos)
    throw InvalidInput("load_field: malformed header in " + path);
  auto parse_num = [&](const char* key) -> double {
    const auto pos = header.find(key);
    if (pos == std::string::npos) throw InvalidInput("load_field: missing key in header");
    return std::strtod(header.c_str() + pos + std::strlen(key), nullptr);
  };
  const double R = parse_num("\"R\":");
  const int n = static_cast<int>(parse_num("\"n\":"));
  if (R != grid->R() || n != grid->n())
    throw InvalidInput("load_field: header grid does not match target grid");
  GridFunction f(grid);
  in.read(reinterpret_cast<char*>(f.values().data()),
          static_cast<std::streamsize>(f.values().size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(f.values().size() * sizeof(double)))
    throw InvalidInput("load_field: truncated payload in " + path);
  return f;
}

// Flat list of grid nodes inside |v| <= radius; the workhorse index set for
// ball-restricted sums.
inline std::vector<std::size_t> ball_nodes(const VelocityGrid& g, double radius) {
  std::vector<std::size_t> out;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (norm2(g.node(i)) <= r2) out.push_back(i);
  return out;
}

}  // namespace ncb
