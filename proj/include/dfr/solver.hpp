#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dfr/scaler.hpp"

namespace dfr {

enum class Penalty { l1, l2, none };

std::string penalty_name(Penalty p);
Penalty penalty_from_name(const std::string& name);

// Regularized multinomial logistic regression:
//   (1/n) * sum_i w[y_i] * CE(softmax(W x_i + b), y_i) + lambda * P(W)
// with P = ||W||_1, 0.5*||W||_F^2 or 0; the bias is never penalized.
// lambda = 1 / (inverse_strength_c * n), so inverse_strength_c carries
// sklearn's LogisticRegression(C=...) meaning.
struct SolverConfig {
  Penalty penalty = Penalty::l1;
  double inverse_strength_c = 1.0;
  std::vector<double> class_weights;  // empty means all ones
  int max_iters = 20000;
  double tolerance = 1e-8;  // target for kkt_residual
  uint64_t seed = 0;        // provenance only; the full-batch solver is deterministic
};

struct LinearHead {
  Eigen::MatrixXd W;  // n_classes × d
  Eigen::VectorXd b;
  Scaler scaler;

  int n_classes() const { return static_cast<int>(W.rows()); }
  Eigen::Index d() const { return W.cols(); }
};

struct FitInfo {
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
  double kkt_residual = 0.0;
  std::vector<double> objective_trace;  // accepted objective per iteration
};

// Proximal operator of t*|.|: sign(x) * max(|x| - t, 0).
double soft_threshold(double x, double t);

double lambda_for(double inverse_strength_c, Eigen::Index n);

// X is expected pre-scaled by the caller (the scaler argument of fit_logreg
// is stored, not applied).
double objective(const LinearHead& head, const Eigen::MatrixXd& X,
                 std::span<const int32_t> y, const SolverConfig& config);

// Max first-order optimality violation at (W, b). For l1 this inspects the
// gradient of the smooth part: |g_j| - lambda where W_j == 0, and
// |g_j + lambda*sign(W_j)| elsewhere. For l2/none it is the sup-norm of the
// full gradient. Bias coordinates always contribute their plain gradient.
double kkt_residual(const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                    const Eigen::MatrixXd& X, std::span<const int32_t> y,
                    std::span<const double> sample_weights, Penalty penalty,
                    double lambda);

// Monotone FISTA with backtracking on the weighted objective; per-example
// weights generalize the class-weight vector (baselines use inverse-frequency
// weights). Deterministic; starts from zero, so the result never scores worse
// than the trivial head.
LinearHead fit_logreg_weighted(const Eigen::MatrixXd& X,
                               std::span<const int32_t> y, int n_classes,
                               std::span<const double> sample_weights,
                               const SolverConfig& config, const Scaler& scaler,
                               FitInfo* info = nullptr);

LinearHead fit_logreg(const Eigen::MatrixXd& X, std::span<const int32_t> y,
                      int n_classes, const SolverConfig& config,
                      const Scaler& scaler, FitInfo* info = nullptr);

// The scaler stored in the head is applied to raw inputs here.
Eigen::MatrixXd predict_logits(const LinearHead& head, const Eigen::MatrixXf& X_raw);
Eigen::MatrixXd predict_logits(const LinearHead& head, const Eigen::MatrixXd& X_raw);
Eigen::MatrixXd predict_proba(const LinearHead& head, const Eigen::MatrixXf& X_raw);
std::vector<int32_t> predict_labels(const LinearHead& head,
                                    const Eigen::MatrixXf& X_raw);

// Softmax with the row max subtracted; rows sum to 1.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);
std::vector<int32_t> argmax_rows(const Eigen::MatrixXd& logits);

// Elementwise mean of W and b; requires identical dims and identical scaler
// statistics across heads.
LinearHead average_weights(const std::vector<LinearHead>& heads);

// Checkpoint (little-endian): magic "DFRH", u32 version=1, u32 n_classes,
// u32 d, f64 W row-major, f64 b, f64 scaler mean, f64 scaler std.
void save_head(const LinearHead& head, const std::string& path);
LinearHead load_head(const std::string& path);

}  // namespace dfr
