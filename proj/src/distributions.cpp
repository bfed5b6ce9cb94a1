#include "lars/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lars/errors.hpp"

namespace lars {

std::vector<double> BoundProposal::log_prob(const Matrix& x) const {
  Tape tape(*params_);
  const Var lp = proposal_->log_prob(tape, tape.constant(x));
  return lp.value().data;
}

Matrix BoundProposal::sample(std::size_t n, Rng& rng) const {
  Tape tape(*params_);
  return proposal_->sample(tape, n, rng).value();
}

Var diag_gaussian_log_prob(Var z, Var mean, Var log_std) {
  const double d = static_cast<double>(z.cols());
  const Var u = (z - mean) * exp(neg(log_std));
  return add_scalar(neg(row_sum(scale(square(u), 0.5) + log_std)), -0.5 * d * kLog2Pi);
}

Var diag_gaussian_sample(Var mean, Var log_std, Rng& rng) {
  const std::size_t rows = std::max(mean.rows(), log_std.rows());
  const Var eps = mean.tape().constant(rng.normal_matrix(rows, mean.cols()));
  return mean + exp(log_std) * eps;
}

namespace {

double standard_normal_row(std::span<const double> z) {
  double s = 0.0;
  for (double v : z) s += v * v;
  return -0.5 * s - 0.5 * static_cast<double>(z.size()) * kLog2Pi;
}

}  // namespace

DiagGaussian::DiagGaussian(std::vector<double> mean, std::vector<double> log_std)
    : mean_(std::move(mean)), log_std_(std::move(log_std)) {
  LARS_REQUIRE(mean_.size() == log_std_.size() && !mean_.empty(), "DiagGaussian: mean/log_std size mismatch");
}

DiagGaussian DiagGaussian::standard(std::size_t dim) {
  return DiagGaussian(std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0));
}

std::vector<double> DiagGaussian::log_prob(const Matrix& x) const {
  LARS_REQUIRE(x.cols == dim(), "DiagGaussian: dimension mismatch");
  std::vector<double> out(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double u = (x(r, j) - mean_[j]) * std::exp(-log_std_[j]);
      s += 0.5 * u * u + log_std_[j];
    }
    out[r] = -s - 0.5 * static_cast<double>(x.cols) * kLog2Pi;
  }
  return out;
}

Matrix DiagGaussian::sample(std::size_t n, Rng& rng) const {
  Matrix out = rng.normal_matrix(n, dim());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < dim(); ++j) out(r, j) = mean_[j] + std::exp(log_std_[j]) * out(r, j);
  return out;
}

Var DiagGaussian::log_prob(Tape& tape, Var z) const {
  LARS_REQUIRE(z.cols() == dim(), "DiagGaussian: dimension mismatch");
  return diag_gaussian_log_prob(z, tape.constant(Matrix(1, dim(), mean_)),
                                tape.constant(Matrix(1, dim(), log_std_)));
}

Var DiagGaussian::sample(Tape& tape, std::size_t n, Rng& rng) const { return tape.constant(sample(n, rng)); }

bool DiagGaussian::symmetric() const {
  return std::all_of(mean_.begin(), mean_.end(), [](double m) { return m == 0.0; });
}

std::vector<double> StandardNormal::log_prob(const Matrix& x) const {
  LARS_REQUIRE(x.cols == dim_, "StandardNormal: dimension mismatch");
  std::vector<double> out(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) out[r] = standard_normal_row(x.row_span(r));
  return out;
}

Matrix StandardNormal::sample(std::size_t n, Rng& rng) const { return rng.normal_matrix(n, dim_); }

Var StandardNormal::log_prob(Tape&, Var z) const {
  LARS_REQUIRE(z.cols() == dim_, "StandardNormal: dimension mismatch");
  return add_scalar(scale(row_sum(square(z)), -0.5), -0.5 * static_cast<double>(dim_) * kLog2Pi);
}

Var StandardNormal::sample(Tape& tape, std::size_t n, Rng& rng) const { return tape.constant(sample(n, rng)); }

MogTarget::MogTarget(std::vector<Component> components) : components_(std::move(components)) {
  LARS_REQUIRE(!components_.empty(), "MogTarget: no components");
  double total = 0.0;
  for (const auto& c : components_) {
    LARS_REQUIRE(c.weight > 0.0 && c.std > 0.0, "MogTarget: weights and stds must be positive");
    total += c.weight;
  }
  double acc = 0.0;
  for (auto& c : components_) {
    c.weight /= total;
    acc += c.weight;
    cumulative_.push_back(acc);
  }
  cumulative_.back() = 1.0;
}

MogTarget MogTarget::grid3x3(double spacing, double std) {
  std::vector<Component> cs;
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j) cs.push_back({1.0, i * spacing, j * spacing, std});
  return MogTarget(std::move(cs));
}

std::vector<double> MogTarget::log_prob(const Matrix& x) const {
  LARS_REQUIRE(x.cols == 2, "MogTarget: expects 2D points");
  std::vector<double> out(x.rows);
  std::vector<double> terms(components_.size());
  for (std::size_t r = 0; r < x.rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < components_.size(); ++k) {
      const auto& c = components_[k];
      const double dx = (x(r, 0) - c.mean_x) / c.std;
      const double dy = (x(r, 1) - c.mean_y) / c.std;
      terms[k] = std::log(c.weight) - 0.5 * (dx * dx + dy * dy) - 2.0 * std::log(c.std) - kLog2Pi;
      mx = std::max(mx, terms[k]);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - mx);
    out[r] = mx + std::log(s);
  }
  return out;
}

std::pair<Matrix, std::vector<std::size_t>> MogTarget::sample_labeled(std::size_t n, Rng& rng) const {
  Matrix out(n, 2);
  std::vector<std::size_t> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double u = rng.uniform();
    const auto k = static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) -
                                            cumulative_.begin());
    const auto& c = components_[std::min(k, components_.size() - 1)];
    labels[r] = std::min(k, components_.size() - 1);
    out(r, 0) = c.mean_x + c.std * rng.normal();
    out(r, 1) = c.mean_y + c.std * rng.normal();
  }
  return {std::move(out), std::move(labels)};
}

Matrix MogTarget::sample(std::size_t n, Rng& rng) const { return sample_labeled(n, rng).first; }

bool is_binary(const Matrix& x) {
  return std::all_of(x.data.begin(), x.data.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

std::vector<double> BernoulliProduct::log_prob(const Matrix& x) const {
  LARS_REQUIRE(x.cols == dim(), "BernoulliProduct: dimension mismatch");
  LARS_REQUIRE(is_binary(x), "BernoulliProduct: observations must be binary");
  std::vector<double> out(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double l = logits_[j];
      // x*l - softplus(l)
      const double sp = l > 0 ? l + std::log1p(std::exp(-l)) : std::log1p(std::exp(l));
      s += x(r, j) * l - sp;
    }
    out[r] = s;
  }
  return out;
}

Matrix BernoulliProduct::sample(std::size_t n, Rng& rng) const {
  Matrix out(n, dim());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < dim(); ++j) {
      const double p = 1.0 / (1.0 + std::exp(-logits_[j]));
      out(r, j) = rng.uniform() < p ? 1.0 : 0.0;
    }
  return out;
}

}  // namespace lars
