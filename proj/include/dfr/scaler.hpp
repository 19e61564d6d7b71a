#pragma once

#include <Eigen/Core>

namespace dfr {

// Standard scaler: per-column mean and population standard deviation.
// Columns with std below 1e-12 get std 1 so the transform maps them to 0.
struct Scaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  Eigen::Index d() const { return mean.size(); }
};

Scaler identity_scaler(Eigen::Index d);
Scaler fit_scaler(const Eigen::MatrixXf& features);
Scaler fit_scaler(const Eigen::MatrixXd& features);

Eigen::MatrixXd apply_scaler(const Scaler& scaler, const Eigen::MatrixXf& features);
Eigen::MatrixXd apply_scaler(const Scaler& scaler, const Eigen::MatrixXd& features);

bool same_scaler(const Scaler& a, const Scaler& b);

}  // namespace dfr
