#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfr/dataset.hpp"
#include "dfr/solver.hpp"
#include "dfr/synth.hpp"

namespace dfr {

// Small feed-forward net: ReLU hidden layers, identity output (logits).
// Feature extraction reads the last hidden layer post-activation; a model
// with no hidden layers exposes its inputs as features.
struct MlpModel {
  std::vector<Eigen::MatrixXd> weights;  // per layer, out × in
  std::vector<Eigen::VectorXd> biases;

  std::vector<int> layer_sizes() const;
  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
  int feature_dim() const;

  Eigen::MatrixXd forward_logits(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd hidden_features(const Eigen::MatrixXd& X) const;

  // The output layer viewed as a LinearHead over hidden features (identity
  // scaler); what the retraining methods replace.
  LinearHead output_head() const;
};

enum class LrSchedule { constant, cosine };

struct TrainConfig {
  std::vector<int> hidden = {64};
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 1e-2;
  double weight_decay = 1e-3;  // applied to weight matrices, not biases
  LrSchedule schedule = LrSchedule::cosine;
  uint64_t seed = 0;
};

struct TrainResult {
  MlpModel model;
  std::vector<double> epoch_loss;  // average cross-entropy per epoch
  double final_loss = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, const std::string& what)
      : std::runtime_error(what), epoch(epoch) {}
  int epoch;
};

// Glorot-uniform initialization, seeded.
MlpModel init_mlp(const std::vector<int>& dims, uint64_t seed);

// Plain minibatch SGD (momentum 0) on average cross-entropy. Deterministic
// given (data, config).
TrainResult train_erm(const Eigen::MatrixXf& inputs, std::span<const int32_t> labels,
                      int n_classes, const TrainConfig& config);
TrainResult train_erm(const RawDataset& raw, const TrainConfig& config);

EmbeddingDataset extract_features(const MlpModel& model, const Eigen::MatrixXf& inputs,
                                  std::span<const int32_t> labels,
                                  std::span<const int32_t> groups, int n_classes,
                                  int n_groups);
EmbeddingDataset extract_features(const MlpModel& model, const RawDataset& raw);

// Backprop gradients of the batch mean cross-entropy (no weight decay).
struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double loss = 0.0;
};
MlpGradients loss_gradients(const MlpModel& model, const Eigen::MatrixXd& X,
                            std::span<const int32_t> labels);

// Max relative error between backprop and central finite differences over a
// random sample of at least 100 parameters:
//   |ga - gf| / max(|ga|, |gf|, 1e-8)
double grad_check(const MlpModel& model, const Eigen::MatrixXd& X,
                  std::span<const int32_t> labels, double epsilon, uint64_t seed);

// Checkpoint (little-endian): magic "DFRM", u32 version=1, u32 n_layers,
// u32 dims[n_layers+1], then per layer f64 W row-major and f64 b.
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace dfr
