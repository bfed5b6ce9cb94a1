#include "lars/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "lars/errors.hpp"

namespace lars {

void GridSpec::validate() const {
  LARS_REQUIRE(n >= 2, "grid needs at least 2 points per axis");
  LARS_REQUIRE(max > min, "grid max must exceed min");
}

LogDensityFn log_density_of(const Density& d) {
  return [&d](const Matrix& x) { return d.log_prob(x); };
}

Matrix grid_points(const GridSpec& grid) {
  grid.validate();
  Matrix pts(grid.points(), 2);
  for (std::size_t iy = 0; iy < grid.n; ++iy)
    for (std::size_t ix = 0; ix < grid.n; ++ix) {
      pts(iy * grid.n + ix, 0) = grid.coord(ix);
      pts(iy * grid.n + ix, 1) = grid.coord(iy);
    }
  return pts;
}

std::vector<double> evaluate_on_grid(const LogDensityFn& f, const GridSpec& grid) {
  grid.validate();
  const std::size_t n = grid.n;
  // one chunk per block of grid rows keeps batches large enough for gemm
  const std::size_t rows_per_chunk = std::max<std::size_t>(1, 8192 / n);
  const std::size_t chunks = (n + rows_per_chunk - 1) / rows_per_chunk;
  std::vector<double> out(grid.points());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t y0 = c * rows_per_chunk;
    const std::size_t y1 = std::min(n, y0 + rows_per_chunk);
    Matrix pts((y1 - y0) * n, 2);
    for (std::size_t iy = y0; iy < y1; ++iy)
      for (std::size_t ix = 0; ix < n; ++ix) {
        pts((iy - y0) * n + ix, 0) = grid.coord(ix);
        pts((iy - y0) * n + ix, 1) = grid.coord(iy);
      }
    const auto vals = f(pts);
    std::copy(vals.begin(), vals.end(), out.begin() + static_cast<std::ptrdiff_t>(y0 * n));
  }
  return out;
}

double trapezoid(const GridSpec& grid, const std::vector<double>& values) {
  LARS_REQUIRE(values.size() == grid.points(), "trapezoid: value count does not match grid");
  const std::size_t n = grid.n;
  const double h = grid.step();
  double total = 0.0;
  for (std::size_t iy = 0; iy < n; ++iy) {
    const double wy = (iy == 0 || iy + 1 == n) ? 0.5 : 1.0;
    double row = 0.0;
    for (std::size_t ix = 0; ix < n; ++ix) {
      const double wx = (ix == 0 || ix + 1 == n) ? 0.5 : 1.0;
      row += wx * values[iy * n + ix];
    }
    total += wy * row;
  }
  return total * h * h;
}

double integrate_exp(const std::vector<double>& log_f, const GridSpec& grid) {
  std::vector<double> v(log_f.size());
  std::transform(log_f.begin(), log_f.end(), v.begin(), [](double l) { return std::exp(l); });
  return trapezoid(grid, v);
}

double integrate_exp(const LogDensityFn& log_f, const GridSpec& grid) {
  return integrate_exp(evaluate_on_grid(log_f, grid), grid);
}

double quadrature_kl(const std::vector<double>& log_q, const std::vector<double>& log_p, const GridSpec& grid) {
  LARS_REQUIRE(log_q.size() == log_p.size(), "quadrature_kl: size mismatch");
  std::vector<double> integrand(log_q.size());
  for (std::size_t i = 0; i < log_q.size(); ++i) {
    const double q = std::exp(log_q[i]);
    integrand[i] = q == 0.0 ? 0.0 : q * (log_q[i] - log_p[i]);
  }
  return trapezoid(grid, integrand);
}

KlResult quadrature_kl(const LogDensityFn& log_q, const LogDensityFn& log_p, const GridSpec& grid, bool check) {
  KlResult r;
  r.kl = quadrature_kl(evaluate_on_grid(log_q, grid), evaluate_on_grid(log_p, grid), grid);
  r.kl_refined = r.kl;
  if (check) {
    const GridSpec fine = grid.refined();
    r.kl_refined = quadrature_kl(evaluate_on_grid(log_q, fine), evaluate_on_grid(log_p, fine), fine);
    r.converged = std::abs(r.kl_refined - r.kl) <= 1e-3;
  }
  return r;
}

void write_grid_csv(const std::filesystem::path& path, const GridColumns& cols) {
  for (const auto& c : cols.columns)
    LARS_REQUIRE(c.size() == cols.grid.points(), "grid column length mismatch");
  LARS_REQUIRE(cols.names.size() == cols.columns.size(), "grid column names mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "x,y";
  for (const auto& n : cols.names) out << ',' << n;
  out << '\n' << std::setprecision(10);
  const std::size_t n = cols.grid.n;
  for (std::size_t iy = 0; iy < n; ++iy)
    for (std::size_t ix = 0; ix < n; ++ix) {
      out << cols.grid.coord(ix) << ',' << cols.grid.coord(iy);
      for (const auto& c : cols.columns) out << ',' << c[iy * n + ix];
      out << '\n';
    }
}

}  // namespace lars
