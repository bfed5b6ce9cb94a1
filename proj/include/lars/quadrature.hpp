#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <vector>

#include "lars/distributions.hpp"
#include "lars/matrix.hpp"

namespace lars {

// n x n grid of points spanning [min, max]^2, endpoints included.
struct GridSpec {
  double min = -8.0;
  double max = 8.0;
  std::size_t n = 600;

  double step() const { return (max - min) / static_cast<double>(n - 1); }
  double coord(std::size_t i) const { return min + step() * static_cast<double>(i); }
  std::size_t points() const { return n * n; }
  // Grid with twice the resolution that contains every point of this one.
  GridSpec refined() const { return {min, max, 2 * n - 1}; }
  void validate() const;
};

// Maps a batch of 2D points (rows) to one log-density per row.
using LogDensityFn = std::function<std::vector<double>(const Matrix&)>;

LogDensityFn log_density_of(const Density& d);

// All grid points as rows, y-major: row = iy * n + ix.
Matrix grid_points(const GridSpec& grid);

// Evaluates `f` over the grid in parallel chunks of rows. `f` must be safe
// to call concurrently.
std::vector<double> evaluate_on_grid(const LogDensityFn& f, const GridSpec& grid);

// 2D trapezoid rule over grid values (y-major).
double trapezoid(const GridSpec& grid, const std::vector<double>& values);

// Integral of exp(log_f) over the grid.
double integrate_exp(const std::vector<double>& log_f, const GridSpec& grid);
double integrate_exp(const LogDensityFn& log_f, const GridSpec& grid);

struct KlResult {
  double kl = 0.0;
  // Same quantity on the refined grid; equal to kl when not checked.
  double kl_refined = 0.0;
  bool converged = true;
};

// KL(q || p) = int q (log q - log p) by trapezoid. Points where q underflows
// to zero contribute nothing. With `check`, the value is recomputed on the
// refined grid and `converged` reports |difference| <= 1e-3.
double quadrature_kl(const std::vector<double>& log_q, const std::vector<double>& log_p, const GridSpec& grid);
KlResult quadrature_kl(const LogDensityFn& log_q, const LogDensityFn& log_p, const GridSpec& grid,
                       bool check = true);

// Named columns over the grid, written as x,y,<names...>.
struct GridColumns {
  GridSpec grid;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
};

void write_grid_csv(const std::filesystem::path& path, const GridColumns& cols);

}  // namespace lars
