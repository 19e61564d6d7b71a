#include "dfr/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "dfr/rng.hpp"

namespace dfr {

namespace {

Eigen::MatrixXd relu(const Eigen::MatrixXd& a) { return a.cwiseMax(0.0); }

double mean_cross_entropy(const Eigen::MatrixXd& logits,
                          std::span<const int32_t> y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double zmax = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
      sum += std::exp(logits(i, c) - zmax);
    total += zmax + std::log(sum) -
             logits(i, static_cast<Eigen::Index>(y[static_cast<size_t>(i)]));
  }
  return total / static_cast<double>(logits.rows());
}

struct Gradients {
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;
};

// Returns the batch mean cross-entropy; fills grads (data term only).
double backprop(const MlpModel& model, const Eigen::MatrixXd& X,
                std::span<const int32_t> y, Gradients& grads) {
  const size_t L = model.weights.size();
  std::vector<Eigen::MatrixXd> acts(L + 1);  // post-activation per layer
  acts[0] = X;
  for (size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd a = acts[l] * model.weights[l].transpose();
    a.rowwise() += model.biases[l].transpose();
    acts[l + 1] = (l + 1 < L) ? relu(a) : std::move(a);
  }
  const Eigen::MatrixXd& logits = acts[L];
  const double loss = mean_cross_entropy(logits, y);

  const double inv_n = 1.0 / static_cast<double>(X.rows());
  Eigen::MatrixXd delta = softmax_rows(logits);
  for (Eigen::Index i = 0; i < delta.rows(); ++i)
    delta(i, static_cast<Eigen::Index>(y[static_cast<size_t>(i)])) -= 1.0;
  delta *= inv_n;

  grads.W.resize(L);
  grads.b.resize(L);
  for (size_t l = L; l-- > 0;) {
    grads.W[l].noalias() = delta.transpose() * acts[l];
    grads.b[l] = delta.colwise().sum();
    if (l > 0) {
      Eigen::MatrixXd dh = delta * model.weights[l];
      // ReLU mask from the post-activation values.
      delta = dh.cwiseProduct(
          (acts[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss;
}

}  // namespace

std::vector<int> MlpModel::layer_sizes() const {
  std::vector<int> dims;
  dims.push_back(input_dim());
  for (const auto& w : weights) dims.push_back(static_cast<int>(w.rows()));
  return dims;
}

int MlpModel::feature_dim() const {
  return weights.size() > 1 ? static_cast<int>(weights.back().cols())
                            : input_dim();
}

Eigen::MatrixXd MlpModel::forward_logits(const Eigen::MatrixXd& X) const {
  if (X.cols() != input_dim())
    throw std::invalid_argument("MlpModel: input width mismatch");
  Eigen::MatrixXd h = X;
  for (size_t l = 0; l < weights.size(); ++l) {
    Eigen::MatrixXd a = h * weights[l].transpose();
    a.rowwise() += biases[l].transpose();
    h = (l + 1 < weights.size()) ? relu(a) : std::move(a);
  }
  return h;
}

Eigen::MatrixXd MlpModel::hidden_features(const Eigen::MatrixXd& X) const {
  if (X.cols() != input_dim())
    throw std::invalid_argument("MlpModel: input width mismatch");
  Eigen::MatrixXd h = X;
  for (size_t l = 0; l + 1 < weights.size(); ++l) {
    Eigen::MatrixXd a = h * weights[l].transpose();
    a.rowwise() += biases[l].transpose();
    h = relu(a);
  }
  return h;
}

LinearHead MlpModel::output_head() const {
  LinearHead head;
  head.W = weights.back();
  head.b = biases.back();
  head.scaler = identity_scaler(weights.back().cols());
  return head;
}

MlpModel init_mlp(const std::vector<int>& dims, uint64_t seed) {
  if (dims.size() < 2)
    throw std::invalid_argument("init_mlp: need at least input and output dims");
  for (int d : dims)
    if (d < 1) throw std::invalid_argument("init_mlp: dims must be >= 1");
  Rng rng(mix_seed(seed, 0xA11Cull));
  MlpModel m;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c)
        w(r, c) = bound * (2.0 * rng.uniform() - 1.0);
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return m;
}

TrainResult train_erm(const Eigen::MatrixXf& inputs, std::span<const int32_t> labels,
                      int n_classes, const TrainConfig& config) {
  if (n_classes < 2) throw std::invalid_argument("train_erm: need n_classes >= 2");
  if (config.epochs < 0 || config.batch_size < 1 || !(config.learning_rate > 0.0) ||
      config.weight_decay < 0.0)
    throw std::invalid_argument("train_erm: invalid config");
  if (static_cast<Eigen::Index>(labels.size()) != inputs.rows())
    throw std::invalid_argument("train_erm: label count mismatch");

  const Eigen::MatrixXd X = inputs.cast<double>();
  std::vector<int> dims;
  dims.push_back(static_cast<int>(X.cols()));
  for (int h : config.hidden) dims.push_back(h);
  dims.push_back(n_classes);

  TrainResult result;
  result.model = init_mlp(dims, config.seed);
  Rng rng(mix_seed(config.seed, 0xBA7C4ull));

  const auto n = X.rows();
  std::vector<size_t> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), size_t{0});

  Gradients grads;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double lr = config.learning_rate;
    if (config.schedule == LrSchedule::cosine && config.epochs > 1)
      lr *= 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(epoch) /
                                  static_cast<double>(config.epochs)));
    rng.shuffle(perm);
    double epoch_total = 0.0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const auto bs = std::min<Eigen::Index>(config.batch_size, n - start);
      Eigen::MatrixXd xb(bs, X.cols());
      std::vector<int32_t> yb(static_cast<size_t>(bs));
      for (Eigen::Index k = 0; k < bs; ++k) {
        xb.row(k) = X.row(static_cast<Eigen::Index>(perm[static_cast<size_t>(start + k)]));
        yb[static_cast<size_t>(k)] = labels[perm[static_cast<size_t>(start + k)]];
      }
      const double loss = backprop(result.model, xb, yb, grads);
      if (!std::isfinite(loss))
        throw TrainingDiverged(epoch, "train_erm: loss became non-finite at epoch " +
                                          std::to_string(epoch));
      epoch_total += loss * static_cast<double>(bs);
      for (size_t l = 0; l < result.model.weights.size(); ++l) {
        if (config.weight_decay > 0.0)
          grads.W[l] += config.weight_decay * result.model.weights[l];
        result.model.weights[l] -= lr * grads.W[l];
        result.model.biases[l] -= lr * grads.b[l];
      }
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(n));
  }
  result.final_loss = result.epoch_loss.empty() ? mean_cross_entropy(
                          result.model.forward_logits(X), labels)
                                                : result.epoch_loss.back();
  return result;
}

TrainResult train_erm(const RawDataset& raw, const TrainConfig& config) {
  return train_erm(raw.inputs, raw.labels, raw.n_classes, config);
}

EmbeddingDataset extract_features(const MlpModel& model, const Eigen::MatrixXf& inputs,
                                  std::span<const int32_t> labels,
                                  std::span<const int32_t> groups, int n_classes,
                                  int n_groups) {
  EmbeddingDataset ds;
  ds.features =
      model.hidden_features(inputs.cast<double>()).cast<float>();
  ds.labels.assign(labels.begin(), labels.end());
  ds.groups.assign(groups.begin(), groups.end());
  ds.n_classes = n_classes;
  ds.n_groups = n_groups;
  return ds;
}

EmbeddingDataset extract_features(const MlpModel& model, const RawDataset& raw) {
  return extract_features(model, raw.inputs, raw.labels, raw.groups,
                          raw.n_classes, raw.n_groups());
}

MlpGradients loss_gradients(const MlpModel& model, const Eigen::MatrixXd& X,
                            std::span<const int32_t> labels) {
  Gradients g;
  MlpGradients out;
  out.loss = backprop(model, X, labels, g);
  out.weights = std::move(g.W);
  out.biases = std::move(g.b);
  return out;
}

double grad_check(const MlpModel& model, const Eigen::MatrixXd& X,
                  std::span<const int32_t> labels, double epsilon, uint64_t seed) {
  if (X.rows() < 1) throw std::invalid_argument("grad_check: empty batch");
  if (epsilon < 1e-7 || epsilon > 1e-3)
    throw std::invalid_argument("grad_check: epsilon must be in [1e-7, 1e-3]");

  Gradients grads;
  MlpModel m = model;
  backprop(m, X, labels, grads);

  // Flat index space over all parameters.
  size_t total = 0;
  for (size_t l = 0; l < m.weights.size(); ++l)
    total += static_cast<size_t>(m.weights[l].size() + m.biases[l].size());
  Rng rng(mix_seed(seed, 0x6D0Cull));
  std::vector<size_t> picks;
  const size_t want = std::min<size_t>(total, 128);
  picks = want == total ? [&] {
    std::vector<size_t> all(total);
    std::iota(all.begin(), all.end(), size_t{0});
    return all;
  }()
                        : rng.sample_without_replacement(total, want);

  double worst = 0.0;
  for (size_t flat : picks) {
    // Locate the parameter.
    size_t off = flat;
    size_t layer = 0;
    bool is_bias = false;
    for (size_t l = 0; l < m.weights.size(); ++l) {
      const auto wsize = static_cast<size_t>(m.weights[l].size());
      const auto bsize = static_cast<size_t>(m.biases[l].size());
      if (off < wsize) { layer = l; break; }
      off -= wsize;
      if (off < bsize) { layer = l; is_bias = true; break; }
      off -= bsize;
    }
    double* p = is_bias ? m.biases[layer].data() + off
                        : m.weights[layer].data() + off;
    const double ga = is_bias ? grads.b[layer](static_cast<Eigen::Index>(off))
                              : grads.W[layer].data()[off];
    // Eigen stores column-major; grads share the layout, so raw offsets line up.
    const double orig = *p;
    Gradients unused;
    *p = orig + epsilon;
    const double fp = backprop(m, X, labels, unused);
    *p = orig - epsilon;
    const double fm = backprop(m, X, labels, unused);
    *p = orig;
    const double gf = (fp - fm) / (2.0 * epsilon);
    const double rel = std::abs(ga - gf) / std::max({std::abs(ga), std::abs(gf), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

namespace {
constexpr char kModelMagic[4] = {'D', 'F', 'R', 'M'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error(path + ": truncated model checkpoint");
  return v;
}
}  // namespace

void save_model(const MlpModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  os.write(kModelMagic, 4);
  put<uint32_t>(os, 1);
  const auto dims = model.layer_sizes();
  put<uint32_t>(os, static_cast<uint32_t>(model.weights.size()));
  for (int d : dims) put<uint32_t>(os, static_cast<uint32_t>(d));
  for (size_t l = 0; l < model.weights.size(); ++l) {
    const auto& w = model.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) put<double>(os, w(r, c));
    for (Eigen::Index r = 0; r < model.biases[l].size(); ++r)
      put<double>(os, model.biases[l](r));
  }
  if (!os) throw std::runtime_error(path + ": write failed");
}

MlpModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kModelMagic, 4) != 0)
    throw std::runtime_error(path + ": bad magic (expected DFRM)");
  const auto version = get<uint32_t>(is, path);
  if (version != 1)
    throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
  const auto n_layers = get<uint32_t>(is, path);
  if (n_layers == 0 || n_layers > 64)
    throw std::runtime_error(path + ": implausible layer count");
  std::vector<uint32_t> dims(n_layers + 1);
  for (auto& d : dims) d = get<uint32_t>(is, path);
  MlpModel m;
  for (uint32_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = get<double>(is, path);
    Eigen::VectorXd b(dims[l + 1]);
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = get<double>(is, path);
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  return m;
}

}  // namespace dfr
