#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dfr/mlp.hpp"
#include "dfr/pipeline.hpp"
#include "dfr/synth.hpp"

namespace dfr {

// Worst-group accuracy of the model's own head on raw inputs.
double erm_worst_group(const MlpModel& model, const RawDataset& data);
GroupMetrics erm_group_metrics(const MlpModel& model, const RawDataset& data,
                               const GroupSchema& schema);

// Worst-group accuracy of a linear probe retrained on the extractor's
// features of a group-balanced held-out set: extract features on val and
// test, run the full retraining protocol with val as the reweighting data,
// and score the test set.
double decoded_accuracy(const MlpModel& model, const RawDataset& val,
                        const RawDataset& test, const GroupSchema& schema,
                        const DfrConfig& config);

// The model's own head evaluated with the spurious block zeroed out.
GroupMetrics core_only_accuracy(const MlpModel& model, const RawDataset& test,
                                const GroupSchema& schema);

// Upper reference: an extractor trained on core-only inputs and evaluated on
// core-only inputs.
double optimal_core_only_wga(const SynthBundle& bundle, const TrainConfig& erm);

// Compares logits on full inputs against the sum of logits on each block
// alone, minus the zero-input logits counted twice by that sum. Exact for
// any linear head; for a network the per-class R^2 of the regression of the
// full logits on the recombined ones is reported.
struct AdditivityReport {
  double max_abs_deviation = 0.0;
  std::vector<double> r_squared;
};
AdditivityReport logit_additivity(const LinearHead& head, const RawDataset& test);
AdditivityReport logit_additivity(const MlpModel& model, const RawDataset& test);

struct RetrainAblationCell {
  int n_retrains = 0;
  double mean_wga = 0.0;
  double std_wga = 0.0;
  std::vector<double> wga;  // one entry per outer seed
};

// Varies only the number of averaged retrains; the dataset, features and
// tuned C are fixed, outer seeds vary the subsample draws.
std::vector<RetrainAblationCell> ablation_retrains(
    const EmbeddingDataset& train, const EmbeddingDataset& reweight,
    const EmbeddingDataset& test, const GroupSchema& schema,
    const DfrConfig& base, std::span<const int> k_grid, int n_outer_seeds);

struct L1AblationReport {
  std::vector<double> wga_l1;
  std::vector<double> wga_none;
  double median_l1 = 0.0;
  double median_none = 0.0;
};

// Paired runs (identical seeds, so identical subsample draws): tuned l1
// versus no penalty, on freshly generated data per outer seed.
L1AblationReport ablation_l1(const SpuriousSpec& spec, const DfrConfig& base,
                             int n_seeds, uint64_t seed);

struct PcorrCell {
  double p_corr = 0.0;
  std::vector<double> erm_wga;
  std::vector<double> dfr_wga;
  double erm_mean = 0.0, erm_std = 0.0;
  double dfr_mean = 0.0, dfr_std = 0.0;
};

struct PcorrReport {
  std::vector<PcorrCell> cells;
  std::vector<double> oracle_wga;  // extractor trained without correlation
  double oracle_mean = 0.0, oracle_std = 0.0;
  std::string to_json() const;
  std::string to_csv() const;
};

struct ExperimentGrid {
  std::vector<double> p_corr = {0.8, 0.9, 0.95, 0.99, 0.995, 1.0};
  int n_outer_seeds = 5;
  SpuriousSpec spec;
  TrainConfig erm;
  DfrConfig dfr;
  uint64_t seed = 0;
};

// Per p_corr and outer seed: generate, train the extractor by ERM, score its
// worst group, then retrain the head on the balanced validation features and
// score again. The oracle column retrains the extractor on uncorrelated data
// (attribute independent of the label).
PcorrReport pcorr_sweep(const ExperimentGrid& grid);

double median(std::vector<double> v);
double mean(std::span<const double> v);
double sample_std(std::span<const double> v);

}  // namespace dfr
