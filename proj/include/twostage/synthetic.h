#pragma once

// Test problem for block splitting:
//
//   f(x, y) = gamma * ln sum_k exp((A_k^T x - b_k) / gamma) + 1/2 z^T B z,   z = (x, y).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "twostage/solvers.h"

namespace twostage {

enum class AMode { kZero, kRandom };

struct SyntheticConfig {
  int dim_x = 10;
  int dim_y = 200;
  int m = 100;  // number of columns A_k
  double gamma = 1e-3;
  double lambda_max = 0.1;  // largest eigenvalue of B
  AMode a_mode = AMode::kZero;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const SyntheticConfig& cfg);
void from_json(const nlohmann::json& j, SyntheticConfig& cfg);

struct SyntheticProblem {
  Eigen::MatrixXd A;  // dim_x x m
  Eigen::VectorXd b;  // m
  Eigen::MatrixXd B;  // (dim_x + dim_y) square, symmetric PSD
  double gamma = 1.0;
  double lambda_max = 0.0;
  int dim_x = 0;
  int dim_y = 0;

  int dimension() const { return dim_x + dim_y; }
  double lipschitz_x() const { return lambda_max + 1.0 / gamma; }
  double lipschitz_y() const { return lambda_max; }
};

/// B = Q diag(eta) Q^T with Q orthogonal (QR of a Gaussian matrix) and
/// eta uniform on [0, lambda_max] with eta_0 = lambda_max. A is zero or has
/// unit-norm Gaussian columns; b is standard normal.
SyntheticProblem make_problem(const SyntheticConfig& cfg);

double synth_value(const SyntheticProblem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct BlockGradients {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};
BlockGradients synth_block_grads(const SyntheticProblem& p, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y);

/// Centered moving average. Interior points average `window` neighbours
/// (for even windows the two outermost get half weight); near the ends the
/// window shrinks symmetrically.
std::vector<double> smooth_trace(std::span<const double> values, int window = 30);

/// Inverse gradient norm, +inf at a stationary point.
double inverse_gradient_norm(const BlockGradients& g);

/// Flat z = (x, y) with blocks {x, y}.
class SyntheticOracle : public Oracle {
 public:
  explicit SyntheticOracle(const SyntheticProblem& problem) : p_(&problem) {}

  std::size_t dimension() const override { return p_->dimension(); }
  std::size_t num_blocks() const override { return 2; }
  std::pair<std::size_t, std::size_t> block_range(std::size_t i) const override;
  double value(std::span<const double> z) override;
  double value_and_gradient(std::span<const double> z, std::span<double> grad) override;
  void block_gradient(std::size_t block, std::span<const double> z,
                      std::span<double> grad) override;

 private:
  const SyntheticProblem* p_;
};

}  // namespace twostage
