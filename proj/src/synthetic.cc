#include "twostage/synthetic.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "twostage/errors.h"

namespace twostage {
namespace {

Eigen::VectorXd concat(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  Eigen::VectorXd z(x.size() + y.size());
  z << x, y;
  return z;
}

void check_dims(const SyntheticProblem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != p.dim_x || y.size() != p.dim_y) {
    throw ValidationError("synthetic point has the wrong dimensions");
  }
}

// Shifted scores (A^T x - b) / gamma and their maximum.
Eigen::VectorXd scores(const SyntheticProblem& p, const Eigen::VectorXd& x) {
  return (p.A.transpose() * x - p.b) / p.gamma;
}

}  // namespace

void to_json(nlohmann::json& j, const SyntheticConfig& cfg) {
  j = nlohmann::json{{"dim_x", cfg.dim_x},
                     {"dim_y", cfg.dim_y},
                     {"m", cfg.m},
                     {"gamma", cfg.gamma},
                     {"lambda_max", cfg.lambda_max},
                     {"a_mode", cfg.a_mode == AMode::kZero ? "zero" : "random"},
                     {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, SyntheticConfig& cfg) {
  SyntheticConfig out;
  out.dim_x = j.value("dim_x", out.dim_x);
  out.dim_y = j.value("dim_y", out.dim_y);
  out.m = j.value("m", out.m);
  out.gamma = j.value("gamma", out.gamma);
  out.lambda_max = j.value("lambda_max", out.lambda_max);
  const std::string mode = j.value("a_mode", std::string("zero"));
  if (mode == "zero") {
    out.a_mode = AMode::kZero;
  } else if (mode == "random") {
    out.a_mode = AMode::kRandom;
  } else {
    throw ValidationError("a_mode must be 'zero' or 'random'");
  }
  out.seed = j.value("seed", out.seed);
  cfg = out;
}

SyntheticProblem make_problem(const SyntheticConfig& cfg) {
  if (cfg.dim_x < 1 || cfg.dim_y < 1 || cfg.m < 1) {
    throw ValidationError("synthetic dimensions must be positive");
  }
  if (!(cfg.gamma > 0.0)) throw DomainError("gamma must be positive");
  if (!(cfg.lambda_max >= 0.0)) throw DomainError("lambda_max must be nonnegative");

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  SyntheticProblem p;
  p.gamma = cfg.gamma;
  p.lambda_max = cfg.lambda_max;
  p.dim_x = cfg.dim_x;
  p.dim_y = cfg.dim_y;
  const int n = cfg.dim_x + cfg.dim_y;

  p.A = Eigen::MatrixXd::Zero(cfg.dim_x, cfg.m);
  if (cfg.a_mode == AMode::kRandom) {
    for (int k = 0; k < cfg.m; ++k) {
      for (int i = 0; i < cfg.dim_x; ++i) p.A(i, k) = normal(rng);
      p.A.col(k).normalize();
    }
  }
  p.b.resize(cfg.m);
  for (int k = 0; k < cfg.m; ++k) p.b(k) = normal(rng);

  Eigen::MatrixXd g(n, n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) g(r, c) = normal(rng);
  }
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  Eigen::VectorXd eta(n);
  eta(0) = cfg.lambda_max;
  for (int i = 1; i < n; ++i) eta(i) = cfg.lambda_max * uniform(rng);
  p.B = q * eta.asDiagonal() * q.transpose();
  p.B = 0.5 * (p.B + p.B.transpose()).eval();
  return p;
}

double synth_value(const SyntheticProblem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  check_dims(p, x, y);
  const Eigen::VectorXd s = scores(p, x);
  const double shift = s.maxCoeff();
  const double lse = shift + std::log((s.array() - shift).exp().sum());
  const Eigen::VectorXd z = concat(x, y);
  return p.gamma * lse + 0.5 * z.dot(p.B * z);
}

BlockGradients synth_block_grads(const SyntheticProblem& p, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y) {
  check_dims(p, x, y);
  const Eigen::VectorXd s = scores(p, x);
  Eigen::VectorXd w = (s.array() - s.maxCoeff()).exp();
  w /= w.sum();
  const Eigen::VectorXd bz = p.B * concat(x, y);
  return {p.A * w + bz.head(p.dim_x), bz.tail(p.dim_y)};
}

double inverse_gradient_norm(const BlockGradients& g) {
  const double norm = std::sqrt(g.x.squaredNorm() + g.y.squaredNorm());
  return norm > 0.0 ? 1.0 / norm : std::numeric_limits<double>::infinity();
}

std::vector<double> smooth_trace(std::span<const double> values, int window) {
  if (window < 1) throw DomainError("smoothing window must be at least 1");
  const long n = static_cast<long>(values.size());
  const long half = window / 2;
  const bool even = window % 2 == 0;
  std::vector<double> out(values.size());
  for (long k = 0; k < n; ++k) {
    const long h = std::min({half, k, n - 1 - k});
    double sum = 0.0;
    double weight = 0.0;
    for (long j = k - h; j <= k + h; ++j) {
      const double w = (even && h == half && (j == k - h || j == k + h)) ? 0.5 : 1.0;
      sum += w * values[j];
      weight += w;
    }
    out[k] = sum / weight;
  }
  return out;
}

std::pair<std::size_t, std::size_t> SyntheticOracle::block_range(std::size_t i) const {
  if (i == 0) return {0, static_cast<std::size_t>(p_->dim_x)};
  if (i == 1) return {static_cast<std::size_t>(p_->dim_x), p_->dimension()};
  throw std::out_of_range("synthetic oracle has two blocks");
}

double SyntheticOracle::value(std::span<const double> z) {
  const Eigen::Map<const Eigen::VectorXd> v(z.data(), static_cast<long>(z.size()));
  return synth_value(*p_, v.head(p_->dim_x), v.tail(p_->dim_y));
}

double SyntheticOracle::value_and_gradient(std::span<const double> z, std::span<double> grad) {
  const Eigen::Map<const Eigen::VectorXd> v(z.data(), static_cast<long>(z.size()));
  const Eigen::VectorXd x = v.head(p_->dim_x), y = v.tail(p_->dim_y);
  const BlockGradients g = synth_block_grads(*p_, x, y);
  std::copy(g.x.data(), g.x.data() + g.x.size(), grad.begin());
  std::copy(g.y.data(), g.y.data() + g.y.size(), grad.begin() + p_->dim_x);
  return synth_value(*p_, x, y);
}

void SyntheticOracle::block_gradient(std::size_t block, std::span<const double> z,
                                     std::span<double> grad) {
  const Eigen::Map<const Eigen::VectorXd> v(z.data(), static_cast<long>(z.size()));
  const Eigen::VectorXd x = v.head(p_->dim_x), y = v.tail(p_->dim_y);
  if (block == 1) {
    const Eigen::VectorXd gy = p_->B.bottomRows(p_->dim_y) * concat(x, y);
    std::copy(gy.data(), gy.data() + gy.size(), grad.begin());
    return;
  }
  const BlockGradients g = synth_block_grads(*p_, x, y);
  std::copy(g.x.data(), g.x.data() + g.x.size(), grad.begin());
}

}  // namespace twostage
