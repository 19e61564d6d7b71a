#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfr/dataset.hpp"
#include "dfr/metrics.hpp"
#include "dfr/solver.hpp"

namespace dfr {

// Which data retrains the head: a held-out set (val_tr), a subset of the
// training data with a class-weight sweep (tr_tr), or a held-out set against
// an extractor trained without minority groups (tr_nm; orchestrated by the
// caller, identical here to val_tr).
enum class DfrVariant { val_tr, tr_tr, tr_nm };

std::string variant_name(DfrVariant v);
DfrVariant variant_from_name(const std::string& name);

struct DfrConfig {
  DfrVariant variant = DfrVariant::val_tr;
  int n_retrains = 10;
  std::vector<double> c_grid = {1.0, 0.7, 0.3, 0.1, 0.07, 0.03, 0.01};
  std::vector<double> class_weight_grid = {1, 2, 3, 10, 100, 300, 1000};
  double tuning_split_fraction = 0.5;
  Penalty penalty = Penalty::l1;
  uint64_t seed = 0;
  int solver_max_iters = 5000;
  double solver_tolerance = 1e-7;
};

struct TuningCell {
  double inverse_strength_c = 0.0;
  std::vector<double> class_weights;
  double tuning_wga = 0.0;
};

struct TuneOutcome {
  double chosen_c = 0.0;
  std::vector<double> chosen_class_weights;
  std::vector<TuningCell> table;
};

struct DfrResult {
  LinearHead head;
  double chosen_c = 0.0;
  std::vector<double> chosen_class_weights;
  std::vector<uint64_t> retrain_seeds;
  std::vector<long> subset_sizes;
  std::vector<TuningCell> tuning_table;
  GroupMetrics test_metrics;
  DfrVariant variant = DfrVariant::val_tr;
  uint64_t seed = 0;
  std::string penalty;

  // Full provenance: hyperparameters, per-retrain seeds and subset sizes,
  // tuning table, metrics, and the solver conventions (lambda mapping,
  // scaler policy) needed to reproduce the run bit-exactly.
  std::string to_json() const;
};

// Keeps every row of each smallest group and draws min-count rows without
// replacement from the others. Output rows keep their original order.
EmbeddingDataset group_balanced_subsample(const EmbeddingDataset& ds, uint64_t seed);

// Half-split tuning: group-stratified 50/50 split of the reweighting set,
// one subsample-and-fit per grid point on half A, worst-group accuracy on
// half B. Ties prefer smaller C (stronger regularization), then the earlier
// class-weight candidate. The caller retrains on the full set afterwards.
TuneOutcome tune(const EmbeddingDataset& reweight, const GroupSchema& schema,
                 const DfrConfig& config);

// The full protocol: scaler fit once on the reweighting set, half-split
// tuning, n_retrains balanced-subsample fits with derived seeds, weight
// averaging, then test metrics weighted by the schema's training counts.
DfrResult run_dfr(const EmbeddingDataset& train, const EmbeddingDataset& reweight,
                  const EmbeddingDataset& test, const GroupSchema& schema,
                  const DfrConfig& config);

// Classifier retraining with class-balanced sampling, expectation form:
// per-example weights inverse to class frequency. No group information.
LinearHead crt_baseline(const EmbeddingDataset& train, const SolverConfig& config);

// Per-class logit scales on a frozen head, trained with class-balanced
// weights; only the C scale factors move. Returns the scales and the head
// with rows rescaled.
struct LwsResult {
  Eigen::VectorXd scales;
  LinearHead head;
};
LwsResult lws_baseline(const LinearHead& frozen, const EmbeddingDataset& data,
                       int max_iters = 500, double tolerance = 1e-10);

// Retraining under a sampler that picks a group uniformly, then an example:
// per-example weights inverse to group frequency. No subsampling.
LinearHead group_balanced_sampling_retrain(const EmbeddingDataset& reweight,
                                           const SolverConfig& config);

}  // namespace dfr
