#include "dfr/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace dfr::oracle {

namespace {

double row_logsumexp(const Eigen::MatrixXd& Z, Eigen::Index i) {
  const double zmax = Z.row(i).maxCoeff();
  double sum = 0.0;
  for (Eigen::Index c = 0; c < Z.cols(); ++c) sum += std::exp(Z(i, c) - zmax);
  return zmax + std::log(sum);
}

double full_objective(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& W,
                      std::span<const int32_t> y, std::span<const double> s,
                      Penalty penalty, double lambda) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    loss += s[static_cast<size_t>(i)] *
            (row_logsumexp(Z, i) -
             Z(i, static_cast<Eigen::Index>(y[static_cast<size_t>(i)])));
  loss /= static_cast<double>(Z.rows());
  if (penalty == Penalty::l1) loss += lambda * W.lpNorm<1>();
  if (penalty == Penalty::l2) loss += 0.5 * lambda * W.squaredNorm();
  return loss;
}

}  // namespace

double reference_objective(const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                           const Eigen::MatrixXd& X, std::span<const int32_t> y,
                           std::span<const double> class_weights, Penalty penalty,
                           double inverse_strength_c) {
  const auto n = X.rows();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    // Per-row softmax cross-entropy, written out directly.
    Eigen::VectorXd z = W * X.row(i).transpose() + b;
    const double zmax = z.maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < z.size(); ++c) sum += std::exp(z(c) - zmax);
    const double log_py =
        z(static_cast<Eigen::Index>(y[static_cast<size_t>(i)])) - zmax - std::log(sum);
    loss -= class_weights[static_cast<size_t>(y[static_cast<size_t>(i)])] * log_py;
  }
  loss /= static_cast<double>(n);
  const double lambda =
      penalty == Penalty::none ? 0.0 : 1.0 / (inverse_strength_c * static_cast<double>(n));
  if (penalty == Penalty::l1) loss += lambda * W.cwiseAbs().sum();
  if (penalty == Penalty::l2) loss += 0.5 * lambda * W.squaredNorm();
  return loss;
}

CdResult coordinate_descent(const Eigen::MatrixXd& X, std::span<const int32_t> y,
                            int n_classes, std::span<const double> sample_weights,
                            Penalty penalty, double inverse_strength_c,
                            int max_sweeps, double tol) {
  const auto n = X.rows();
  const auto d = X.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double lambda =
      penalty == Penalty::none ? 0.0 : 1.0 / (inverse_strength_c * static_cast<double>(n));

  CdResult r;
  r.W = Eigen::MatrixXd::Zero(n_classes, d);
  r.b = Eigen::VectorXd::Zero(n_classes);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n_classes);
  double f_cur = full_objective(Z, r.W, y, sample_weights, penalty, lambda);

  // One coordinate move: soft-thresholded Newton step on the 1-D restriction,
  // halved until the true objective does not increase.
  auto update_coord = [&](Eigen::Index c, Eigen::Index j, bool is_bias) {
    double g1 = 0.0, g2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lse = row_logsumexp(Z, i);
      const double p = std::exp(Z(i, c) - lse);
      const double xij = is_bias ? 1.0 : X(i, j);
      const double si = sample_weights[static_cast<size_t>(i)];
      const double indicator =
          (static_cast<Eigen::Index>(y[static_cast<size_t>(i)]) == c) ? 1.0 : 0.0;
      g1 += si * (p - indicator) * xij;
      g2 += si * p * (1.0 - p) * xij * xij;
    }
    g1 *= inv_n;
    g2 = g2 * inv_n + 1e-10;

    const double t0 = is_bias ? r.b(c) : r.W(c, j);
    double t_new;
    if (is_bias || penalty == Penalty::none) {
      t_new = t0 - g1 / g2;
    } else if (penalty == Penalty::l2) {
      // Newton step on g(t) + lambda*t^2/2.
      t_new = (g2 * t0 - g1) / (g2 + lambda);
    } else {
      const double u = t0 - g1 / g2;
      const double mag = std::abs(u) - lambda / g2;
      t_new = mag > 0.0 ? (u > 0.0 ? mag : -mag) : 0.0;
    }
    double delta = t_new - t0;
    if (delta == 0.0) return;
    for (int bt = 0; bt < 40 && delta != 0.0; ++bt) {
      if (is_bias) {
        Z.col(c).array() += delta;
      } else {
        Z.col(c) += delta * X.col(j);
      }
      Eigen::MatrixXd& W = r.W;
      const double old = is_bias ? r.b(c) : W(c, j);
      if (is_bias)
        r.b(c) = old + delta;
      else
        W(c, j) = old + delta;
      const double f_new = full_objective(Z, r.W, y, sample_weights, penalty, lambda);
      if (f_new <= f_cur + 1e-15 * std::abs(f_cur)) {
        f_cur = f_new;
        return;
      }
      // revert and damp
      if (is_bias) {
        Z.col(c).array() -= delta;
        r.b(c) = old;
      } else {
        Z.col(c) -= delta * X.col(j);
        W(c, j) = old;
      }
      delta *= 0.5;
      if (std::abs(delta) < 1e-16) break;
    }
  };

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const double f_before = f_cur;
    for (Eigen::Index c = 0; c < n_classes; ++c)
      for (Eigen::Index j = 0; j < d; ++j) update_coord(c, j, false);
    for (Eigen::Index c = 0; c < n_classes; ++c) update_coord(c, 0, true);
    r.sweeps = sweep + 1;
    if (f_before - f_cur <= tol * std::max(1.0, std::abs(f_before))) break;
  }
  r.objective = f_cur;
  return r;
}

double golden_section(const std::function<double(double)>& f, double lo,
                      double hi, double tol) {
  if (!(hi > lo)) throw std::invalid_argument("golden_section: bad interval");
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

double bayes_core_accuracy(int n_classes, double margin, double sigma) {
  if (n_classes < 2) throw std::invalid_argument("bayes_core_accuracy: C >= 2");
  if (sigma <= 0.0) return 1.0;
  const double snr = margin / sigma;
  auto phi = [](double t) {
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
  };
  auto cdf = [](double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); };
  // Simpson over t in [-10, 10].
  const int steps = 4000;  // even
  const double a = -10.0, b = 10.0;
  const double h = (b - a) / steps;
  double acc = 0.0;
  for (int k = 0; k <= steps; ++k) {
    const double t = a + h * k;
    const double v = phi(t) * std::pow(cdf(snr + t), n_classes - 1);
    const double w = (k == 0 || k == steps) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    acc += w * v;
  }
  return acc * h / 3.0;
}

double chance_level(std::span<const double> class_priors) {
  double best = 0.0;
  for (double p : class_priors) best = std::max(best, p);
  return best;
}

}  // namespace dfr::oracle
