#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>
#include <vector>

#include "dfr/solver.hpp"

namespace dfr::oracle {

// Independent reference implementations. Everything here recomputes the math
// from scratch (no calls into the solver's evaluation path) so it can stand
// as a second opinion on the production code.

// Straightforward re-implementation of the regularized objective.
double reference_objective(const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                           const Eigen::MatrixXd& X, std::span<const int32_t> y,
                           std::span<const double> class_weights, Penalty penalty,
                           double inverse_strength_c);

// Cyclic coordinate descent with a GLMNET-style 1-D quadratic model per
// coordinate (soft-thresholded Newton step, backtracked on the true
// objective). Minimizes the same objective as fit_logreg.
struct CdResult {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  double objective = 0.0;
  int sweeps = 0;
};
CdResult coordinate_descent(const Eigen::MatrixXd& X, std::span<const int32_t> y,
                            int n_classes, std::span<const double> sample_weights,
                            Penalty penalty, double inverse_strength_c,
                            int max_sweeps = 2000, double tol = 1e-12);

// Golden-section search for a unimodal scalar function on [lo, hi].
double golden_section(const std::function<double(double)>& f, double lo,
                      double hi, double tol);

// Bayes accuracy of the Gaussian core block with orthonormal class means at
// distance `margin` and isotropic noise `sigma`, evaluated on group-balanced
// data (the spurious block carries no label information there):
//   acc = E_t[ Phi(margin/sigma + t)^(C-1) ],  t ~ N(0,1)
// computed by Simpson quadrature.
double bayes_core_accuracy(int n_classes, double margin, double sigma);

// Accuracy of always predicting the most common class.
double chance_level(std::span<const double> class_priors);

}  // namespace dfr::oracle
