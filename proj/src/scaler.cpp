#include "dfr/scaler.hpp"

#include <stdexcept>

namespace dfr {

namespace {

Scaler fit_impl(const Eigen::MatrixXd& x) {
  if (x.rows() < 1) throw std::invalid_argument("fit_scaler: empty matrix");
  Scaler s;
  s.mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
  s.std = (centered.array().square().colwise().mean()).sqrt();
  for (Eigen::Index j = 0; j < s.std.size(); ++j) {
    if (!(s.std(j) > 1e-12)) s.std(j) = 1.0;
  }
  return s;
}

}  // namespace

Scaler identity_scaler(Eigen::Index d) {
  Scaler s;
  s.mean = Eigen::VectorXd::Zero(d);
  s.std = Eigen::VectorXd::Ones(d);
  return s;
}

Scaler fit_scaler(const Eigen::MatrixXf& features) {
  return fit_impl(features.cast<double>());
}

Scaler fit_scaler(const Eigen::MatrixXd& features) { return fit_impl(features); }

Eigen::MatrixXd apply_scaler(const Scaler& scaler, const Eigen::MatrixXd& features) {
  if (features.cols() != scaler.d())
    throw std::invalid_argument("apply_scaler: width mismatch");
  return (features.rowwise() - scaler.mean.transpose()).array().rowwise() /
         scaler.std.transpose().array();
}

Eigen::MatrixXd apply_scaler(const Scaler& scaler, const Eigen::MatrixXf& features) {
  return apply_scaler(scaler, Eigen::MatrixXd(features.cast<double>()));
}

bool same_scaler(const Scaler& a, const Scaler& b) {
  return a.mean.size() == b.mean.size() && a.mean == b.mean && a.std == b.std;
}

}  // namespace dfr
