#include "dfr/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "dfr/rng.hpp"

namespace dfr {

using nlohmann::json;

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty");
  std::sort(v.begin(), v.end());
  const size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

GroupMetrics erm_group_metrics(const MlpModel& model, const RawDataset& data,
                               const GroupSchema& schema) {
  const auto preds =
      argmax_rows(model.forward_logits(data.inputs.cast<double>()));
  return evaluate_groups(preds, data.labels, data.groups, data.n_groups(),
                         schema.train_counts());
}

double erm_worst_group(const MlpModel& model, const RawDataset& data) {
  const auto preds =
      argmax_rows(model.forward_logits(data.inputs.cast<double>()));
  return worst_group_accuracy(
      group_accuracies(preds, data.labels, data.groups, data.n_groups()));
}

double decoded_accuracy(const MlpModel& model, const RawDataset& val,
                        const RawDataset& test, const GroupSchema& schema,
                        const DfrConfig& config) {
  const auto val_emb = extract_features(model, val);
  const auto test_emb = extract_features(model, test);
  const auto result = run_dfr(val_emb, val_emb, test_emb, schema, config);
  return result.test_metrics.worst_group_accuracy;
}

GroupMetrics core_only_accuracy(const MlpModel& model, const RawDataset& test,
                                const GroupSchema& schema) {
  return erm_group_metrics(model, ablate_spurious_block(test, AblateMode::zero_spurious),
                           schema);
}

double optimal_core_only_wga(const SynthBundle& bundle, const TrainConfig& erm) {
  const auto train_core =
      ablate_spurious_block(bundle.train, AblateMode::zero_spurious);
  const auto test_core =
      ablate_spurious_block(bundle.test, AblateMode::zero_spurious);
  const auto trained = train_erm(train_core, erm);
  return erm_worst_group(trained.model, test_core);
}

namespace {

AdditivityReport additivity_from_logits(const Eigen::MatrixXd& full,
                                        const Eigen::MatrixXd& core,
                                        const Eigen::MatrixXd& spur,
                                        const Eigen::RowVectorXd& zero) {
  // The sum of the two maskings counts the constant (zero-input) response
  // twice; subtract it once to recombine.
  Eigen::MatrixXd combined = core + spur;
  combined.rowwise() -= zero;
  AdditivityReport rep;
  rep.max_abs_deviation = (full - combined).cwiseAbs().maxCoeff();
  rep.r_squared.resize(static_cast<size_t>(full.cols()));
  for (Eigen::Index c = 0; c < full.cols(); ++c) {
    const Eigen::VectorXd a = full.col(c);
    const Eigen::VectorXd b = combined.col(c);
    const double ma = a.mean(), mb = b.mean();
    const double cov = ((a.array() - ma) * (b.array() - mb)).mean();
    const double va = (a.array() - ma).square().mean();
    const double vb = (b.array() - mb).square().mean();
    rep.r_squared[static_cast<size_t>(c)] =
        (va > 0 && vb > 0) ? (cov * cov) / (va * vb) : 1.0;
  }
  return rep;
}

}  // namespace

AdditivityReport logit_additivity(const LinearHead& head, const RawDataset& test) {
  const auto core = ablate_spurious_block(test, AblateMode::zero_spurious);
  const auto spur = ablate_spurious_block(test, AblateMode::zero_core);
  const Eigen::MatrixXf zero_input =
      Eigen::MatrixXf::Zero(1, test.inputs.cols());
  return additivity_from_logits(
      predict_logits(head, test.inputs), predict_logits(head, core.inputs),
      predict_logits(head, spur.inputs),
      predict_logits(head, zero_input).row(0));
}

AdditivityReport logit_additivity(const MlpModel& model, const RawDataset& test) {
  const auto core = ablate_spurious_block(test, AblateMode::zero_spurious);
  const auto spur = ablate_spurious_block(test, AblateMode::zero_core);
  const Eigen::MatrixXd zero_input =
      Eigen::MatrixXd::Zero(1, test.inputs.cols());
  return additivity_from_logits(
      model.forward_logits(test.inputs.cast<double>()),
      model.forward_logits(core.inputs.cast<double>()),
      model.forward_logits(spur.inputs.cast<double>()),
      model.forward_logits(zero_input).row(0));
}

std::vector<RetrainAblationCell> ablation_retrains(
    const EmbeddingDataset& train, const EmbeddingDataset& reweight,
    const EmbeddingDataset& test, const GroupSchema& schema,
    const DfrConfig& base, std::span<const int> k_grid, int n_outer_seeds) {
  // Tune once; the ablation isolates the averaging, not the grid search.
  DfrConfig tuned_cfg = base;
  const auto tuned = tune(reweight, schema, tuned_cfg);
  tuned_cfg.c_grid = {tuned.chosen_c};
  tuned_cfg.class_weight_grid = {1.0};
  tuned_cfg.variant = DfrVariant::val_tr;

  std::vector<RetrainAblationCell> cells;
  for (int k : k_grid) {
    RetrainAblationCell cell;
    cell.n_retrains = k;
    for (int s = 0; s < n_outer_seeds; ++s) {
      DfrConfig cfg = tuned_cfg;
      cfg.n_retrains = k;
      cfg.seed = mix_seed(base.seed, 0xAB1000u + static_cast<uint64_t>(s));
      const auto result = run_dfr(train, reweight, test, schema, cfg);
      cell.wga.push_back(result.test_metrics.worst_group_accuracy);
    }
    cell.mean_wga = mean(cell.wga);
    cell.std_wga = sample_std(cell.wga);
    cells.push_back(std::move(cell));
  }
  return cells;
}

L1AblationReport ablation_l1(const SpuriousSpec& spec, const DfrConfig& base,
                             int n_seeds, uint64_t seed) {
  L1AblationReport rep;
  for (int s = 0; s < n_seeds; ++s) {
    const auto bundle = generate(spec, mix_seed(seed, static_cast<uint64_t>(s)));
    const auto reweight = bundle.val.as_embeddings();
    const auto test = bundle.test.as_embeddings();

    DfrConfig l1_cfg = base;
    l1_cfg.penalty = Penalty::l1;
    l1_cfg.seed = mix_seed(seed, 0x11000u + static_cast<uint64_t>(s));

    DfrConfig none_cfg = l1_cfg;  // identical seeds: identical subsample draws
    none_cfg.penalty = Penalty::none;
    none_cfg.c_grid = {1.0};

    rep.wga_l1.push_back(run_dfr(reweight, reweight, test, bundle.schema, l1_cfg)
                             .test_metrics.worst_group_accuracy);
    rep.wga_none.push_back(run_dfr(reweight, reweight, test, bundle.schema, none_cfg)
                               .test_metrics.worst_group_accuracy);
  }
  rep.median_l1 = median(rep.wga_l1);
  rep.median_none = median(rep.wga_none);
  return rep;
}

PcorrReport pcorr_sweep(const ExperimentGrid& grid) {
  PcorrReport rep;
  for (size_t pi = 0; pi < grid.p_corr.size(); ++pi) {
    PcorrCell cell;
    cell.p_corr = grid.p_corr[pi];
    SpuriousSpec spec = grid.spec;
    spec.p_corr = grid.p_corr[pi];
    for (int s = 0; s < grid.n_outer_seeds; ++s) {
      const uint64_t data_seed =
          mix_seed(grid.seed, (pi << 8) + static_cast<uint64_t>(s));
      const auto bundle = generate(spec, data_seed);
      TrainConfig erm = grid.erm;
      erm.seed = mix_seed(data_seed, 0xE3);
      const auto trained = train_erm(bundle.train, erm);
      cell.erm_wga.push_back(erm_worst_group(trained.model, bundle.test));

      DfrConfig dfr_cfg = grid.dfr;
      dfr_cfg.seed = mix_seed(data_seed, 0xDF3);
      cell.dfr_wga.push_back(decoded_accuracy(trained.model, bundle.val,
                                              bundle.test, bundle.schema, dfr_cfg));
    }
    cell.erm_mean = mean(cell.erm_wga);
    cell.erm_std = sample_std(cell.erm_wga);
    cell.dfr_mean = mean(cell.dfr_wga);
    cell.dfr_std = sample_std(cell.dfr_wga);
    rep.cells.push_back(std::move(cell));
  }
  // No-correlation oracle: attribute drawn independently of the label.
  SpuriousSpec oracle_spec = grid.spec;
  oracle_spec.p_corr = 1.0 / grid.spec.n_classes;
  for (int s = 0; s < grid.n_outer_seeds; ++s) {
    const uint64_t data_seed = mix_seed(grid.seed, 0xFFFF00u + static_cast<uint64_t>(s));
    const auto bundle = generate(oracle_spec, data_seed);
    TrainConfig erm = grid.erm;
    erm.seed = mix_seed(data_seed, 0xE3);
    const auto trained = train_erm(bundle.train, erm);
    rep.oracle_wga.push_back(erm_worst_group(trained.model, bundle.test));
  }
  rep.oracle_mean = mean(rep.oracle_wga);
  rep.oracle_std = sample_std(rep.oracle_wga);
  return rep;
}

std::string PcorrReport::to_json() const {
  json j;
  j["oracle"] = {{"wga", oracle_wga}, {"mean", oracle_mean}, {"std", oracle_std}};
  j["cells"] = json::array();
  for (const auto& c : cells) {
    j["cells"].push_back({{"p_corr", c.p_corr},
                          {"erm_wga", c.erm_wga},
                          {"dfr_wga", c.dfr_wga},
                          {"erm_mean", c.erm_mean},
                          {"erm_std", c.erm_std},
                          {"dfr_mean", c.dfr_mean},
                          {"dfr_std", c.dfr_std}});
  }
  return j.dump(2);
}

std::string PcorrReport::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "p_corr,erm_mean,erm_std,dfr_mean,dfr_std\n";
  for (const auto& c : cells)
    os << c.p_corr << "," << c.erm_mean << "," << c.erm_std << "," << c.dfr_mean
       << "," << c.dfr_std << "\n";
  os << "oracle," << oracle_mean << "," << oracle_std << ",,\n";
  return os.str();
}

}  // namespace dfr
