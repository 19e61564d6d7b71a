#include "dfr/solver.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace dfr {

namespace {

struct Params {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

// Weighted cross-entropy average and its gradient. Z is reused as scratch.
struct SmoothEval {
  double value = 0.0;
  Eigen::MatrixXd gW;
  Eigen::VectorXd gb;
};

double logsumexp_rows_ce(const Eigen::MatrixXd& Z, std::span<const int32_t> y,
                         std::span<const double> s, double inv_n) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    const double zmax = Z.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < Z.cols(); ++c) sum += std::exp(Z(i, c) - zmax);
    const double lse = zmax + std::log(sum);
    total += s[static_cast<size_t>(i)] * (lse - Z(i, static_cast<Eigen::Index>(y[static_cast<size_t>(i)])));
  }
  return total * inv_n;
}

class Problem {
 public:
  Problem(const Eigen::MatrixXd& X, std::span<const int32_t> y, int n_classes,
          std::span<const double> s, Penalty penalty, double lambda)
      : X_(X), y_(y), s_(s), penalty_(penalty), lambda_(lambda),
        n_classes_(n_classes), inv_n_(1.0 / static_cast<double>(X.rows())) {}

  // value + gradient of the smooth part (cross-entropy average, plus the l2
  // term which is smooth).
  void eval_smooth(const Params& p, SmoothEval& out, bool want_grad) const {
    Eigen::MatrixXd Z = X_ * p.W.transpose();
    Z.rowwise() += p.b.transpose();
    out.value = logsumexp_rows_ce(Z, y_, s_, inv_n_);
    if (want_grad) {
      Eigen::MatrixXd P = softmax_rows(Z);
      for (Eigen::Index i = 0; i < P.rows(); ++i) {
        P(i, static_cast<Eigen::Index>(y_[static_cast<size_t>(i)])) -= 1.0;
        P.row(i) *= s_[static_cast<size_t>(i)] * inv_n_;
      }
      out.gW.noalias() = P.transpose() * X_;
      out.gb = P.colwise().sum();
    }
    if (penalty_ == Penalty::l2) {
      out.value += 0.5 * lambda_ * p.W.squaredNorm();
      if (want_grad) out.gW += lambda_ * p.W;
    }
  }

  double nonsmooth(const Params& p) const {
    return penalty_ == Penalty::l1 ? lambda_ * p.W.lpNorm<1>() : 0.0;
  }

  Params prox(const Params& p, double step) const {
    if (penalty_ != Penalty::l1) return p;
    Params out = p;
    const double t = lambda_ * step;
    for (Eigen::Index r = 0; r < out.W.rows(); ++r)
      for (Eigen::Index c = 0; c < out.W.cols(); ++c)
        out.W(r, c) = soft_threshold(out.W(r, c), t);
    return out;
  }

  double lambda() const { return lambda_; }
  Penalty penalty() const { return penalty_; }
  int n_classes() const { return n_classes_; }

 private:
  const Eigen::MatrixXd& X_;
  std::span<const int32_t> y_;
  std::span<const double> s_;
  Penalty penalty_;
  double lambda_;
  int n_classes_;
  double inv_n_;
};

double dot(const Params& a, const Params& b) {
  return a.W.cwiseProduct(b.W).sum() + a.b.dot(b.b);
}

Params sub(const Params& a, const Params& b) { return {a.W - b.W, a.b - b.b}; }

std::vector<double> expand_class_weights(const SolverConfig& config,
                                         std::span<const int32_t> y, int n_classes) {
  std::vector<double> cw = config.class_weights;
  if (cw.empty()) cw.assign(static_cast<size_t>(n_classes), 1.0);
  if (static_cast<int>(cw.size()) != n_classes)
    throw std::invalid_argument("class_weights size does not match n_classes");
  for (double w : cw)
    if (!(w > 0.0)) throw std::invalid_argument("class_weights must be positive");
  std::vector<double> s(y.size());
  for (size_t i = 0; i < y.size(); ++i) s[i] = cw[static_cast<size_t>(y[i])];
  return s;
}

}  // namespace

std::string penalty_name(Penalty p) {
  switch (p) {
    case Penalty::l1: return "l1";
    case Penalty::l2: return "l2";
    default: return "none";
  }
}

Penalty penalty_from_name(const std::string& name) {
  if (name == "l1") return Penalty::l1;
  if (name == "l2") return Penalty::l2;
  if (name == "none") return Penalty::none;
  throw std::invalid_argument("unknown penalty '" + name + "'");
}

double soft_threshold(double x, double t) {
  if (t < 0.0) throw std::invalid_argument("soft_threshold: t must be >= 0");
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

double lambda_for(double inverse_strength_c, Eigen::Index n) {
  if (!(inverse_strength_c > 0.0))
    throw std::invalid_argument("inverse_strength_c must be > 0");
  return 1.0 / (inverse_strength_c * static_cast<double>(n));
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double zmax = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      p(i, c) = std::exp(logits(i, c) - zmax);
      sum += p(i, c);
    }
    p.row(i) /= sum;
  }
  return p;
}

std::vector<int32_t> argmax_rows(const Eigen::MatrixXd& logits) {
  std::vector<int32_t> out(static_cast<size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = static_cast<int>(c);
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

double objective(const LinearHead& head, const Eigen::MatrixXd& X,
                 std::span<const int32_t> y, const SolverConfig& config) {
  if (X.cols() != head.W.cols())
    throw std::invalid_argument("objective: dimension mismatch");
  const auto s = expand_class_weights(config, y, head.n_classes());
  const double lambda =
      config.penalty == Penalty::none ? 0.0 : lambda_for(config.inverse_strength_c, X.rows());
  Problem prob(X, y, head.n_classes(), s, config.penalty, lambda);
  SmoothEval ev;
  Params p{head.W, head.b};
  prob.eval_smooth(p, ev, /*want_grad=*/false);
  return ev.value + prob.nonsmooth(p);
}

double kkt_residual(const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                    const Eigen::MatrixXd& X, std::span<const int32_t> y,
                    std::span<const double> sample_weights, Penalty penalty,
                    double lambda) {
  Problem prob(X, y, static_cast<int>(W.rows()), sample_weights, penalty, lambda);
  SmoothEval ev;
  prob.eval_smooth({W, b}, ev, /*want_grad=*/true);
  double worst = ev.gb.cwiseAbs().maxCoeff();
  if (penalty == Penalty::l1) {
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      for (Eigen::Index c = 0; c < W.cols(); ++c) {
        const double g = ev.gW(r, c);
        const double v = W(r, c) == 0.0
                             ? std::max(0.0, std::abs(g) - lambda)
                             : std::abs(g + lambda * (W(r, c) > 0 ? 1.0 : -1.0));
        worst = std::max(worst, v);
      }
    }
  } else {
    // l2 is folded into the smooth gradient already; none has lambda 0.
    worst = std::max(worst, ev.gW.cwiseAbs().maxCoeff());
  }
  return worst;
}

LinearHead fit_logreg_weighted(const Eigen::MatrixXd& X,
                               std::span<const int32_t> y, int n_classes,
                               std::span<const double> sample_weights,
                               const SolverConfig& config, const Scaler& scaler,
                               FitInfo* info) {
  const auto n = X.rows();
  const auto d = X.cols();
  if (n < n_classes)
    throw std::invalid_argument("fit_logreg: need at least one row per class");
  if (static_cast<Eigen::Index>(y.size()) != n ||
      static_cast<Eigen::Index>(sample_weights.size()) != n)
    throw std::invalid_argument("fit_logreg: length mismatch");
  {
    std::vector<bool> seen(static_cast<size_t>(n_classes), false);
    for (int32_t v : y) {
      if (v < 0 || v >= n_classes)
        throw std::invalid_argument("fit_logreg: label out of range");
      seen[static_cast<size_t>(v)] = true;
    }
    for (int c = 0; c < n_classes; ++c)
      if (!seen[static_cast<size_t>(c)])
        throw std::invalid_argument("fit_logreg: class " + std::to_string(c) +
                                    " missing from data");
  }
  if (!(config.tolerance > 0.0))
    throw std::invalid_argument("fit_logreg: tolerance must be > 0");

  const double lambda = config.penalty == Penalty::none
                            ? 0.0
                            : lambda_for(config.inverse_strength_c, n);
  Problem prob(X, y, n_classes, sample_weights, config.penalty, lambda);

  Params x{Eigen::MatrixXd::Zero(n_classes, d), Eigen::VectorXd::Zero(n_classes)};
  Params ymom = x;

  SmoothEval ev;
  prob.eval_smooth(x, ev, /*want_grad=*/false);
  double fx = ev.value + prob.nonsmooth(x);

  double max_w = 0.0;
  for (double s : sample_weights) max_w = std::max(max_w, s);
  double row_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    row_sq = std::max(row_sq, X.row(i).squaredNorm() + 1.0);  // +1 for the bias
  double L = std::max(1e-8, 0.25 * max_w * row_sq / static_cast<double>(n));
  double t = 1.0;

  bool converged = false;
  int iter = 0;
  double kkt = std::numeric_limits<double>::infinity();
  for (; iter < config.max_iters; ++iter) {
    prob.eval_smooth(ymom, ev, /*want_grad=*/true);
    const double gy = ev.value;

    // Backtracking: find L with g(z) below the quadratic model at y.
    Params z;
    double gz = 0.0;
    for (int bt = 0; bt < 80; ++bt) {
      z = prob.prox({ymom.W - ev.gW / L, ymom.b - ev.gb / L}, 1.0 / L);
      SmoothEval evz;
      prob.eval_smooth(z, evz, /*want_grad=*/false);
      gz = evz.value;
      const Params diff = sub(z, ymom);
      const double quad =
          gy + dot({ev.gW, ev.gb}, diff) + 0.5 * L * dot(diff, diff);
      if (gz <= quad + 1e-15 * std::abs(quad)) break;
      L *= 2.0;
    }
    const double fz = gz + prob.nonsmooth(z);
    if (!std::isfinite(fz))
      throw std::runtime_error("fit_logreg: objective became non-finite");

    // Monotone step: never accept an increase.
    Params x_new = fz <= fx ? z : x;
    const double fx_new = std::min(fz, fx);

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    ymom.W = x_new.W + (t / t_next) * (z.W - x_new.W) +
             ((t - 1.0) / t_next) * (x_new.W - x.W);
    ymom.b = x_new.b + (t / t_next) * (z.b - x_new.b) +
             ((t - 1.0) / t_next) * (x_new.b - x.b);
    x = x_new;
    fx = fx_new;
    t = t_next;
    L = std::max(1e-8, L * 0.97);
    if (info) info->objective_trace.push_back(fx);

    if (iter % 10 == 9 || iter + 1 == config.max_iters) {
      kkt = kkt_residual(x.W, x.b, X, y, sample_weights, config.penalty, lambda);
      if (kkt <= config.tolerance) {
        converged = true;
        ++iter;
        break;
      }
    }
  }
  if (!converged)
    kkt = kkt_residual(x.W, x.b, X, y, sample_weights, config.penalty, lambda);

  LinearHead head;
  head.W = std::move(x.W);
  head.b = std::move(x.b);
  head.scaler = scaler;
  if (info) {
    info->converged = converged;
    info->iterations = iter;
    info->objective = fx;
    info->kkt_residual = kkt;
  }
  return head;
}

LinearHead fit_logreg(const Eigen::MatrixXd& X, std::span<const int32_t> y,
                      int n_classes, const SolverConfig& config,
                      const Scaler& scaler, FitInfo* info) {
  const auto s = expand_class_weights(config, y, n_classes);
  return fit_logreg_weighted(X, y, n_classes, s, config, scaler, info);
}

Eigen::MatrixXd predict_logits(const LinearHead& head, const Eigen::MatrixXd& X_raw) {
  if (X_raw.cols() != head.d())
    throw std::invalid_argument("predict: width mismatch");
  Eigen::MatrixXd Z = apply_scaler(head.scaler, X_raw) * head.W.transpose();
  Z.rowwise() += head.b.transpose();
  return Z;
}

Eigen::MatrixXd predict_logits(const LinearHead& head, const Eigen::MatrixXf& X_raw) {
  return predict_logits(head, Eigen::MatrixXd(X_raw.cast<double>()));
}

Eigen::MatrixXd predict_proba(const LinearHead& head, const Eigen::MatrixXf& X_raw) {
  return softmax_rows(predict_logits(head, X_raw));
}

std::vector<int32_t> predict_labels(const LinearHead& head,
                                    const Eigen::MatrixXf& X_raw) {
  return argmax_rows(predict_logits(head, X_raw));
}

LinearHead average_weights(const std::vector<LinearHead>& heads) {
  if (heads.empty()) throw std::invalid_argument("average_weights: no heads");
  LinearHead out = heads[0];
  // Anchored mean: interpolating from the first head keeps the average of K
  // identical heads bitwise equal to them.
  Eigen::MatrixXd dW = Eigen::MatrixXd::Zero(out.W.rows(), out.W.cols());
  Eigen::VectorXd db = Eigen::VectorXd::Zero(out.b.size());
  for (size_t k = 1; k < heads.size(); ++k) {
    const auto& h = heads[k];
    if (h.W.rows() != out.W.rows() || h.W.cols() != out.W.cols())
      throw std::invalid_argument("average_weights: dimension mismatch");
    if (!same_scaler(h.scaler, out.scaler))
      throw std::invalid_argument(
          "average_weights: heads were fit under different scalers");
    dW += h.W - out.W;
    db += h.b - out.b;
  }
  out.W += dW / static_cast<double>(heads.size());
  out.b += db / static_cast<double>(heads.size());
  return out;
}

namespace {
constexpr char kHeadMagic[4] = {'D', 'F', 'R', 'H'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error(path + ": truncated head checkpoint");
  return v;
}
}  // namespace

void save_head(const LinearHead& head, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  os.write(kHeadMagic, 4);
  put<uint32_t>(os, 1);
  put<uint32_t>(os, static_cast<uint32_t>(head.n_classes()));
  put<uint32_t>(os, static_cast<uint32_t>(head.d()));
  for (Eigen::Index r = 0; r < head.W.rows(); ++r)
    for (Eigen::Index c = 0; c < head.W.cols(); ++c) put<double>(os, head.W(r, c));
  for (Eigen::Index c = 0; c < head.b.size(); ++c) put<double>(os, head.b(c));
  for (Eigen::Index j = 0; j < head.scaler.mean.size(); ++j)
    put<double>(os, head.scaler.mean(j));
  for (Eigen::Index j = 0; j < head.scaler.std.size(); ++j)
    put<double>(os, head.scaler.std(j));
  if (!os) throw std::runtime_error(path + ": write failed");
}

LinearHead load_head(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kHeadMagic, 4) != 0)
    throw std::runtime_error(path + ": bad magic (expected DFRH)");
  const auto version = get<uint32_t>(is, path);
  if (version != 1)
    throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
  const auto C = get<uint32_t>(is, path);
  const auto d = get<uint32_t>(is, path);
  LinearHead head;
  head.W.resize(C, d);
  head.b.resize(C);
  head.scaler.mean.resize(d);
  head.scaler.std.resize(d);
  for (uint32_t r = 0; r < C; ++r)
    for (uint32_t c = 0; c < d; ++c) head.W(r, c) = get<double>(is, path);
  for (uint32_t c = 0; c < C; ++c) head.b(c) = get<double>(is, path);
  for (uint32_t j = 0; j < d; ++j) head.scaler.mean(j) = get<double>(is, path);
  for (uint32_t j = 0; j < d; ++j) head.scaler.std(j) = get<double>(is, path);
  return head;
}

}  // namespace dfr
