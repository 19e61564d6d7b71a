#include "dfr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <stdexcept>

#include "dfr/rng.hpp"

namespace dfr {

namespace {

using nlohmann::json;

std::vector<std::vector<size_t>> rows_by_group(const EmbeddingDataset& ds) {
  std::vector<std::vector<size_t>> rows(static_cast<size_t>(ds.n_groups));
  for (size_t i = 0; i < ds.groups.size(); ++i)
    rows[static_cast<size_t>(ds.groups[i])].push_back(i);
  return rows;
}

void require_all_groups_present(const EmbeddingDataset& ds, const char* where) {
  const auto counts = ds.group_counts();
  for (size_t g = 0; g < counts.size(); ++g) {
    if (counts[g] == 0)
      throw std::invalid_argument(std::string(where) + ": group " +
                                  std::to_string(g) + " is empty");
  }
}

double wga_on(const LinearHead& head, const EmbeddingDataset& ds) {
  const auto preds = predict_labels(head, ds.features);
  return worst_group_accuracy(
      group_accuracies(preds, ds.labels, ds.groups, ds.n_groups));
}

// Class-weight candidates in tie-break order: all-ones first, then one
// swept class at a time (Appendix-B style: fix one class at 1, sweep the
// other, then switch).
std::vector<std::vector<double>> class_weight_candidates(const DfrConfig& config,
                                                         int n_classes) {
  std::vector<std::vector<double>> out;
  out.emplace_back(static_cast<size_t>(n_classes), 1.0);
  if (config.variant != DfrVariant::tr_tr) return out;
  for (int c = 0; c < n_classes; ++c) {
    for (double g : config.class_weight_grid) {
      if (g == 1.0) continue;
      std::vector<double> w(static_cast<size_t>(n_classes), 1.0);
      w[static_cast<size_t>(c)] = g;
      out.push_back(std::move(w));
    }
  }
  return out;
}

SolverConfig solver_config_for(const DfrConfig& config, double c,
                               std::vector<double> class_weights) {
  SolverConfig sc;
  sc.penalty = config.penalty;
  sc.inverse_strength_c = c;
  sc.class_weights = std::move(class_weights);
  sc.max_iters = config.solver_max_iters;
  sc.tolerance = config.solver_tolerance;
  return sc;
}

std::vector<double> class_frequency_weights(const EmbeddingDataset& ds) {
  std::vector<long> counts(static_cast<size_t>(ds.n_classes), 0);
  for (int32_t y : ds.labels) ++counts[static_cast<size_t>(y)];
  for (int c = 0; c < ds.n_classes; ++c) {
    if (counts[static_cast<size_t>(c)] == 0)
      throw std::invalid_argument("class " + std::to_string(c) +
                                  " missing from data");
  }
  const double n = static_cast<double>(ds.n());
  std::vector<double> w(ds.labels.size());
  for (size_t i = 0; i < ds.labels.size(); ++i)
    w[i] = n / (static_cast<double>(ds.n_classes) *
                static_cast<double>(counts[static_cast<size_t>(ds.labels[i])]));
  return w;
}

}  // namespace

std::string variant_name(DfrVariant v) {
  switch (v) {
    case DfrVariant::val_tr: return "val_tr";
    case DfrVariant::tr_tr: return "tr_tr";
    default: return "tr_nm";
  }
}

DfrVariant variant_from_name(const std::string& name) {
  if (name == "val_tr") return DfrVariant::val_tr;
  if (name == "tr_tr") return DfrVariant::tr_tr;
  if (name == "tr_nm") return DfrVariant::tr_nm;
  throw std::invalid_argument("unknown DFR variant '" + name + "'");
}

EmbeddingDataset group_balanced_subsample(const EmbeddingDataset& ds, uint64_t seed) {
  require_all_groups_present(ds, "group_balanced_subsample");
  const auto by_group = rows_by_group(ds);
  size_t m = ds.groups.size();
  for (const auto& rows : by_group) m = std::min(m, rows.size());

  std::vector<size_t> keep;
  for (size_t g = 0; g < by_group.size(); ++g) {
    const auto& rows = by_group[g];
    if (rows.size() == m) {
      keep.insert(keep.end(), rows.begin(), rows.end());
    } else {
      Rng rng(mix_seed(seed, g));
      for (size_t j : rng.sample_without_replacement(rows.size(), m))
        keep.push_back(rows[j]);
    }
  }
  std::sort(keep.begin(), keep.end());
  return ds.subset(keep);
}

namespace {

// Group-stratified 50/50 split; the fit half receives the odd row.
std::pair<EmbeddingDataset, EmbeddingDataset> tuning_split(
    const EmbeddingDataset& reweight, double fraction, uint64_t seed) {
  const auto by_group = rows_by_group(reweight);
  std::vector<size_t> fit_rows, eval_rows;
  for (size_t g = 0; g < by_group.size(); ++g) {
    auto rows = by_group[g];
    if (rows.size() < 2)
      throw std::invalid_argument("tune: group " + std::to_string(g) +
                                  " has fewer than 2 rows; it would be absent "
                                  "from one tuning half");
    Rng rng(mix_seed(seed, 0x7E57u + g));
    rng.shuffle(rows);
    const size_t n_fit = static_cast<size_t>(
        std::ceil(fraction * static_cast<double>(rows.size()) - 1e-12));
    for (size_t i = 0; i < rows.size(); ++i)
      (i < n_fit ? fit_rows : eval_rows).push_back(rows[i]);
  }
  std::sort(fit_rows.begin(), fit_rows.end());
  std::sort(eval_rows.begin(), eval_rows.end());
  return {reweight.subset(fit_rows), reweight.subset(eval_rows)};
}

TuneOutcome tune_impl(const EmbeddingDataset& reweight, const DfrConfig& config,
                      const Scaler& scaler) {
  if (config.c_grid.empty()) throw std::invalid_argument("tune: empty C grid");
  if (!(config.tuning_split_fraction > 0.0 && config.tuning_split_fraction < 1.0))
    throw std::invalid_argument("tune: tuning_split_fraction must be in (0, 1)");

  const auto cw_candidates = class_weight_candidates(config, reweight.n_classes);
  TuneOutcome out;
  if (config.c_grid.size() == 1 && cw_candidates.size() == 1) {
    out.chosen_c = config.c_grid[0];
    out.chosen_class_weights = cw_candidates[0];
    return out;  // nothing to tune, no fits spent
  }

  auto [fit_half, eval_half] =
      tuning_split(reweight, config.tuning_split_fraction, config.seed);
  const auto sub = group_balanced_subsample(fit_half, mix_seed(config.seed, 0xF17u));
  const Eigen::MatrixXd X = apply_scaler(scaler, sub.features);

  // Selection order: best tuning WGA, then smaller C (stronger
  // regularization), then the earlier class-weight candidate.
  double best_wga = -1.0;
  size_t best_cw = 0;
  double best_c = 0.0;
  for (size_t w = 0; w < cw_candidates.size(); ++w) {
    for (double c : config.c_grid) {
      const auto sc = solver_config_for(config, c, cw_candidates[w]);
      const LinearHead head = fit_logreg(X, sub.labels, sub.n_classes, sc, scaler);
      const double wga = wga_on(head, eval_half);
      out.table.push_back({c, cw_candidates[w], wga});
      const bool first = best_wga < 0.0;
      const bool tie = std::abs(wga - best_wga) <= 1e-12;
      if (first || wga > best_wga + 1e-12 || (tie && c < best_c - 1e-15)) {
        best_wga = wga;
        best_c = c;
        best_cw = w;
      }
    }
  }
  out.chosen_c = best_c;
  out.chosen_class_weights = cw_candidates[best_cw];
  return out;
}

}  // namespace

TuneOutcome tune(const EmbeddingDataset& reweight, const GroupSchema& schema,
                 const DfrConfig& config) {
  (void)schema;
  return tune_impl(reweight, config, fit_scaler(reweight.features));
}

DfrResult run_dfr(const EmbeddingDataset& train, const EmbeddingDataset& reweight,
                  const EmbeddingDataset& test, const GroupSchema& schema,
                  const DfrConfig& config) {
  if (train.d() != reweight.d() || reweight.d() != test.d())
    throw std::invalid_argument("run_dfr: datasets disagree on feature width");
  if (train.n_classes != reweight.n_classes || reweight.n_classes != test.n_classes ||
      train.n_groups != reweight.n_groups || reweight.n_groups != test.n_groups)
    throw std::invalid_argument("run_dfr: datasets disagree on classes/groups");
  if (config.n_retrains < 1)
    throw std::invalid_argument("run_dfr: n_retrains must be >= 1");
  require_all_groups_present(reweight, "run_dfr (reweighting set)");

  // Scaler statistics come from the full reweighting set, once.
  const Scaler scaler = fit_scaler(reweight.features);

  DfrResult result;
  result.variant = config.variant;
  result.seed = config.seed;
  result.penalty = penalty_name(config.penalty);

  const TuneOutcome tuned = tune_impl(reweight, config, scaler);
  result.chosen_c = tuned.chosen_c;
  result.chosen_class_weights = tuned.chosen_class_weights;
  result.tuning_table = tuned.table;

  std::vector<LinearHead> heads;
  heads.reserve(static_cast<size_t>(config.n_retrains));
  for (int k = 0; k < config.n_retrains; ++k) {
    const uint64_t sk = mix_seed(config.seed, 1000u + static_cast<uint64_t>(k));
    const auto sub = group_balanced_subsample(reweight, sk);
    const Eigen::MatrixXd X = apply_scaler(scaler, sub.features);
    const auto sc =
        solver_config_for(config, tuned.chosen_c, tuned.chosen_class_weights);
    heads.push_back(fit_logreg(X, sub.labels, sub.n_classes, sc, scaler));
    result.retrain_seeds.push_back(sk);
    result.subset_sizes.push_back(static_cast<long>(sub.n()));
  }
  result.head = average_weights(heads);

  const auto preds = predict_labels(result.head, test.features);
  result.test_metrics = evaluate_groups(preds, test.labels, test.groups,
                                        test.n_groups, schema.train_counts());
  (void)train;  // extractor-side data; carried for interface symmetry
  return result;
}

LinearHead crt_baseline(const EmbeddingDataset& train, const SolverConfig& config) {
  if (train.n_classes < 2)
    throw std::invalid_argument("crt_baseline: need at least two classes");
  const auto weights = class_frequency_weights(train);
  const Scaler scaler = fit_scaler(train.features);
  const Eigen::MatrixXd X = apply_scaler(scaler, train.features);
  return fit_logreg_weighted(X, train.labels, train.n_classes, weights, config,
                             scaler);
}

LwsResult lws_baseline(const LinearHead& frozen, const EmbeddingDataset& data,
                       int max_iters, double tolerance) {
  if (data.d() != frozen.d())
    throw std::invalid_argument("lws_baseline: width mismatch");
  const auto sample_weights = class_frequency_weights(data);
  const Eigen::MatrixXd X = apply_scaler(frozen.scaler, data.features);
  const Eigen::MatrixXd S = X * frozen.W.transpose();  // n×C, per-class scores
  const int C = frozen.n_classes();
  const auto n = X.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  Eigen::VectorXd f = Eigen::VectorXd::Ones(C);
  auto eval = [&](const Eigen::VectorXd& scales, Eigen::VectorXd* grad) {
    Eigen::MatrixXd Z = S.array().rowwise() * scales.transpose().array();
    Z.rowwise() += frozen.b.transpose();
    double loss = 0.0;
    Eigen::MatrixXd P = softmax_rows(Z);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto yi = static_cast<Eigen::Index>(data.labels[static_cast<size_t>(i)]);
      const double zmax = Z.row(i).maxCoeff();
      double sum = 0.0;
      for (Eigen::Index c = 0; c < C; ++c) sum += std::exp(Z(i, c) - zmax);
      loss += sample_weights[static_cast<size_t>(i)] *
              (zmax + std::log(sum) - Z(i, yi));
    }
    loss *= inv_n;
    if (grad) {
      grad->setZero(C);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto yi = static_cast<Eigen::Index>(data.labels[static_cast<size_t>(i)]);
        for (Eigen::Index c = 0; c < C; ++c) {
          const double r = P(i, c) - (c == yi ? 1.0 : 0.0);
          (*grad)(c) += sample_weights[static_cast<size_t>(i)] * r * S(i, c) * inv_n;
        }
      }
    }
    return loss;
  };

  Eigen::VectorXd grad(C);
  double loss = eval(f, &grad);
  double step = 1.0;
  for (int it = 0; it < max_iters; ++it) {
    if (grad.cwiseAbs().maxCoeff() <= tolerance) break;
    // Armijo backtracking on the scale vector.
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      Eigen::VectorXd cand = f - step * grad;
      const double cand_loss = eval(cand, nullptr);
      if (cand_loss <= loss - 1e-4 * step * grad.squaredNorm()) {
        f = std::move(cand);
        loss = cand_loss;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    step = std::min(step * 2.0, 1e6);
    loss = eval(f, &grad);
  }

  LwsResult out;
  out.scales = f;
  out.head = frozen;
  out.head.W = frozen.W.array().colwise() * f.array();
  return out;
}

LinearHead group_balanced_sampling_retrain(const EmbeddingDataset& reweight,
                                           const SolverConfig& config) {
  require_all_groups_present(reweight, "group_balanced_sampling_retrain");
  const auto counts = reweight.group_counts();
  const double n = static_cast<double>(reweight.n());
  const double G = static_cast<double>(reweight.n_groups);
  std::vector<double> weights(reweight.groups.size());
  for (size_t i = 0; i < reweight.groups.size(); ++i)
    weights[i] =
        n / (G * static_cast<double>(counts[static_cast<size_t>(reweight.groups[i])]));
  const Scaler scaler = fit_scaler(reweight.features);
  const Eigen::MatrixXd X = apply_scaler(scaler, reweight.features);
  return fit_logreg_weighted(X, reweight.labels, reweight.n_classes, weights,
                             config, scaler);
}

std::string DfrResult::to_json() const {
  json j;
  j["variant"] = variant_name(variant);
  j["seed"] = seed;
  j["penalty"] = penalty;
  j["chosen_c"] = chosen_c;
  j["chosen_class_weights"] = chosen_class_weights;
  j["retrain_seeds"] = retrain_seeds;
  j["subset_sizes"] = subset_sizes;
  j["n_retrains"] = retrain_seeds.size();
  j["tuning_table"] = json::array();
  for (const auto& cell : tuning_table) {
    j["tuning_table"].push_back({{"c", cell.inverse_strength_c},
                                 {"class_weights", cell.class_weights},
                                 {"tuning_wga", cell.tuning_wga}});
  }
  j["metrics"] = json::parse(test_metrics.to_json());
  j["provenance"] = {{"lambda_mapping", "1/(C*n)"},
                     {"scaler_policy", "fit_once_on_reweighting_set"},
                     {"tuning_fits", "single_fit_per_grid_point"}};
  return j.dump(2);
}

}  // namespace dfr
