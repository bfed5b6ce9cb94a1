#pragma once

#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "lars/autodiff.hpp"
#include "lars/matrix.hpp"
#include "lars/params.hpp"
#include "lars/rng.hpp"

namespace lars {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Evaluation contract shared by every density: one log-density per row,
// exact i.i.d. samples as rows.
class Density {
 public:
  virtual ~Density() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> log_prob(const Matrix& x) const = 0;
  virtual Matrix sample(std::size_t n, Rng& rng) const = 0;
};

// A tractable density that can serve as the LARS proposal. Both operations
// are recorded on a tape: log_prob is differentiable w.r.t. its input and
// any parameters, and sample is reparameterized where parameters exist.
class Proposal {
 public:
  virtual ~Proposal() = default;
  virtual std::size_t dim() const = 0;
  virtual Var log_prob(Tape& tape, Var z) const = 0;  // R x 1
  virtual Var sample(Tape& tape, std::size_t n, Rng& rng) const = 0;
  // z and -z have the same density (required for antithetic sampling).
  virtual bool symmetric() const { return false; }
  // Registers parameters (if any) in `store`.
  virtual void init(ParamStore&, Rng&) const {}
};

// Binds a Proposal to its parameter values for evaluation-only use.
class BoundProposal final : public Density {
 public:
  BoundProposal(const Proposal& proposal, const ParamStore& params) : proposal_(&proposal), params_(&params) {}
  std::size_t dim() const override { return proposal_->dim(); }
  std::vector<double> log_prob(const Matrix& x) const override;
  Matrix sample(std::size_t n, Rng& rng) const override;

 private:
  const Proposal* proposal_;
  const ParamStore* params_;
};

// Tape form of the diagonal Gaussian: per-row log N(z; mean, exp(log_std)^2).
Var diag_gaussian_log_prob(Var z, Var mean, Var log_std);
// mean + exp(log_std) * eps with eps ~ N(0, I) drawn from `rng`.
Var diag_gaussian_sample(Var mean, Var log_std, Rng& rng);

// N(mean, diag(exp(2 log_std))) with fixed parameters.
class DiagGaussian final : public Density, public Proposal {
 public:
  DiagGaussian(std::vector<double> mean, std::vector<double> log_std);
  static DiagGaussian standard(std::size_t dim);

  std::size_t dim() const override { return mean_.size(); }
  std::vector<double> log_prob(const Matrix& x) const override;
  Matrix sample(std::size_t n, Rng& rng) const override;
  Var log_prob(Tape& tape, Var z) const override;
  Var sample(Tape& tape, std::size_t n, Rng& rng) const override;
  bool symmetric() const override;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& log_std() const { return log_std_; }

 private:
  std::vector<double> mean_;
  std::vector<double> log_std_;
};

// Standard normal N(0, I): the default proposal.
class StandardNormal final : public Density, public Proposal {
 public:
  explicit StandardNormal(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  std::vector<double> log_prob(const Matrix& x) const override;
  Matrix sample(std::size_t n, Rng& rng) const override;
  Var log_prob(Tape& tape, Var z) const override;
  Var sample(Tape& tape, std::size_t n, Rng& rng) const override;
  bool symmetric() const override { return true; }

 private:
  std::size_t dim_;
};

// Mixture of isotropic 2D Gaussians; sample-able target of the toy problems.
class MogTarget final : public Density {
 public:
  struct Component {
    double weight;
    double mean_x;
    double mean_y;
    double std;
  };

  explicit MogTarget(std::vector<Component> components);
  // Equal-weight 3 x 3 grid with means in {-spacing, 0, spacing}^2.
  static MogTarget grid3x3(double spacing, double std);

  std::size_t dim() const override { return 2; }
  std::vector<double> log_prob(const Matrix& x) const override;
  Matrix sample(std::size_t n, Rng& rng) const override;
  // Samples together with the index of the component each came from.
  std::pair<Matrix, std::vector<std::size_t>> sample_labeled(std::size_t n, Rng& rng) const;

  const std::vector<Component>& components() const { return components_; }

 private:
  std::vector<Component> components_;
  std::vector<double> cumulative_;
};

// Product of independent Bernoullis parameterized by logits.
class BernoulliProduct final : public Density {
 public:
  explicit BernoulliProduct(std::vector<double> logits) : logits_(std::move(logits)) {}
  std::size_t dim() const override { return logits_.size(); }
  // Rows must be binary.
  std::vector<double> log_prob(const Matrix& x) const override;
  Matrix sample(std::size_t n, Rng& rng) const override;

  const std::vector<double>& logits() const { return logits_; }

 private:
  std::vector<double> logits_;
};

// True if every entry is exactly 0 or 1.
bool is_binary(const Matrix& x);

}  // namespace lars
