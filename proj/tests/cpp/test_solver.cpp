#include <doctest.h>

#include <Eigen/Core>
#include <cmath>
#include <numeric>

#include "dfr/oracles.hpp"
#include "dfr/rng.hpp"
#include "dfr/solver.hpp"
#include "dfr/synth.hpp"

using namespace dfr;

namespace {

struct Toy {
  Eigen::MatrixXd X;
  std::vector<int32_t> y;
  int C = 2;
};

Toy random_toy(Rng& rng, int n, int d, int C) {
  Toy t;
  t.C = C;
  t.X.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) t.X(i, j) = rng.normal();
  t.y.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    t.y[static_cast<size_t>(i)] = static_cast<int32_t>(rng.below(static_cast<uint64_t>(C)));
  for (int c = 0; c < C; ++c) t.y[static_cast<size_t>(c)] = static_cast<int32_t>(c);
  return t;
}

}  // namespace

TEST_CASE("soft_threshold basics") {
  CHECK(soft_threshold(5.0, 2.0) == doctest::Approx(3.0));
  CHECK(soft_threshold(-1.0, 2.0) == 0.0);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const double x = 10.0 * rng.normal();
    CHECK(soft_threshold(x, 0.0) == x);
  }
  CHECK_THROWS(soft_threshold(1.0, -0.5));
}

TEST_CASE("objective at the zero head is ln C under uniform weights") {
  Rng rng(2);
  for (int C : {2, 3, 5}) {
    Toy t = random_toy(rng, 30, 4, C);
    LinearHead head{Eigen::MatrixXd::Zero(C, 4), Eigen::VectorXd::Zero(C),
                    identity_scaler(4)};
    SolverConfig cfg;
    cfg.penalty = Penalty::none;
    CHECK(objective(head, t.X, t.y, cfg) ==
          doctest::Approx(std::log(C)).epsilon(1e-12));
  }
}

TEST_CASE("objective approaches the penalty term when the correct logit dominates") {
  Eigen::MatrixXd X(1, 1);
  X(0, 0) = 1.0;
  std::vector<int32_t> y{1};
  LinearHead head{Eigen::MatrixXd::Zero(2, 1), Eigen::VectorXd::Zero(2),
                  identity_scaler(1)};
  head.W(1, 0) = 500.0;  // huge correct logit: the CE term vanishes
  SolverConfig cfg;
  cfg.penalty = Penalty::l1;
  cfg.inverse_strength_c = 2.0;
  const double lambda = lambda_for(2.0, 1);
  CHECK(objective(head, X, y, cfg) ==
        doctest::Approx(lambda * 500.0).epsilon(1e-12));
}

TEST_CASE("objective matches the independent re-implementation") {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    Toy toy = random_toy(rng, 25, 5, 3);
    LinearHead head{Eigen::MatrixXd(3, 5), Eigen::VectorXd(3), identity_scaler(5)};
    for (Eigen::Index i = 0; i < head.W.size(); ++i) head.W.data()[i] = rng.normal();
    for (int c = 0; c < 3; ++c) head.b(c) = rng.normal();
    SolverConfig cfg;
    cfg.penalty = t % 2 == 0 ? Penalty::l1 : Penalty::l2;
    cfg.inverse_strength_c = 0.7;
    cfg.class_weights = {1.0, 2.5, 0.5};
    const double got = objective(head, toy.X, toy.y, cfg);
    const double want = oracle::reference_objective(
        head.W, head.b, toy.X, toy.y, cfg.class_weights, cfg.penalty, 0.7);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("two-point 1-D problem matches the golden-section oracle") {
  Eigen::MatrixXd X(2, 1);
  X(0, 0) = -1.0;
  X(1, 0) = 1.0;
  std::vector<int32_t> y{0, 1};
  SolverConfig cfg;
  cfg.penalty = Penalty::l2;
  cfg.inverse_strength_c = 1.0;
  cfg.tolerance = 1e-12;
  cfg.max_iters = 200000;
  FitInfo info;
  const LinearHead head = fit_logreg(X, y, 2, cfg, identity_scaler(1), &info);

  // Reduced objective over the logit difference u = a*x + beta.
  const double lambda = lambda_for(1.0, 2);
  auto reduced = [&](double a, double beta) {
    double loss = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double u = a * X(i, 0) + beta;
      const double sp = std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u)));
      loss += y[static_cast<size_t>(i)] == 1 ? sp - u : sp;
    }
    return loss / 2.0 + 0.25 * lambda * a * a;
  };
  auto best_beta = [&](double a) {
    return oracle::golden_section([&](double b) { return reduced(a, b); }, -20.0,
                                  20.0, 1e-11);
  };
  const double a_star = oracle::golden_section(
      [&](double a) { return reduced(a, best_beta(a)); }, -40.0, 40.0, 1e-11);
  const double beta_star = best_beta(a_star);
  CHECK(std::abs(head.W(1, 0) - head.W(0, 0) - a_star) < 1e-6);
  CHECK(std::abs(head.b(1) - head.b(0) - beta_star) < 1e-6);
}

TEST_CASE("overwhelming l1 strength zeroes the weights and leaves the prior in the bias") {
  Rng rng(4);
  Toy t = random_toy(rng, 60, 6, 2);
  for (int i = 0; i < 60; ++i) t.y[static_cast<size_t>(i)] = i % 4 == 0 ? 1 : 0;
  SolverConfig cfg;
  cfg.penalty = Penalty::l1;
  cfg.inverse_strength_c = 1e-7;  // lambda is enormous
  cfg.tolerance = 1e-10;
  FitInfo info;
  const LinearHead head = fit_logreg(t.X, t.y, 2, cfg, identity_scaler(6), &info);
  CHECK(head.W.cwiseAbs().maxCoeff() == 0.0);
  // With W = 0 the probabilities are the softmax of the bias: class priors.
  const auto proba = predict_proba(head, Eigen::MatrixXf::Zero(1, 6));
  CHECK(proba(0, 0) == doctest::Approx(0.75).epsilon(1e-3));
  CHECK(proba(0, 1) == doctest::Approx(0.25).epsilon(1e-3));
  const auto labels = predict_labels(head, Eigen::MatrixXf::Random(5, 6));
  for (int32_t v : labels) CHECK(v == 0);
}

TEST_CASE("strong l1 shrinks the spurious block relative to an unpenalized fit") {
  SpuriousSpec spec;
  spec.d_core = 4;
  spec.d_spurious = 4;
  spec.core_noise_sigma = 0.6;
  spec.spurious_noise_sigma = 0.05;
  spec.p_corr = 0.95;
  spec.n_train = 500;
  spec.n_val = 200;
  spec.n_test = 100;
  const auto bundle = generate(spec, 99);
  // Balanced val: the spurious block is uninformative there.
  const auto ds = bundle.val.as_embeddings();
  const Scaler scaler = fit_scaler(ds.features);
  const Eigen::MatrixXd X = apply_scaler(scaler, ds.features);

  SolverConfig none_cfg;
  none_cfg.penalty = Penalty::none;
  none_cfg.max_iters = 2000;
  const LinearHead free_head = fit_logreg(X, ds.labels, 2, none_cfg, scaler);

  SolverConfig l1_cfg;
  l1_cfg.penalty = Penalty::l1;
  l1_cfg.inverse_strength_c = 0.05;
  const LinearHead l1_head = fit_logreg(X, ds.labels, 2, l1_cfg, scaler);

  auto block_ratio = [&](const LinearHead& h) {
    const double sp = h.W.rightCols(spec.d_spurious).norm();
    const double core = h.W.leftCols(spec.d_core).norm();
    return sp / std::max(core, 1e-12);
  };
  CHECK(block_ratio(l1_head) < block_ratio(free_head));
}

TEST_CASE("KKT residual and the trivial-point bound hold at the returned solution") {
  Rng rng(5);
  for (int t = 0; t < 6; ++t) {
    Toy toy = random_toy(rng, 40 + t * 10, 5, 2 + t % 2);
    SolverConfig cfg;
    cfg.penalty = t % 3 == 0 ? Penalty::l2 : Penalty::l1;
    cfg.inverse_strength_c = 0.5;
    cfg.tolerance = cfg.penalty == Penalty::l2 ? 1e-8 : 1e-6;
    FitInfo info;
    fit_logreg(toy.X, toy.y, toy.C, cfg, identity_scaler(5), &info);
    CHECK(info.converged);
    if (cfg.penalty == Penalty::l2) CHECK(info.kkt_residual <= 1e-6);
    else CHECK(info.kkt_residual <= 1e-4);

    LinearHead zero{Eigen::MatrixXd::Zero(toy.C, 5), Eigen::VectorXd::Zero(toy.C),
                    identity_scaler(5)};
    CHECK(info.objective <= objective(zero, toy.X, toy.y, cfg) + 1e-12);
  }
}

TEST_CASE("objective trace is monotonically non-increasing") {
  Rng rng(6);
  Toy toy = random_toy(rng, 80, 8, 3);
  SolverConfig cfg;
  cfg.penalty = Penalty::l1;
  cfg.inverse_strength_c = 0.3;
  FitInfo info;
  fit_logreg(toy.X, toy.y, 3, cfg, identity_scaler(8), &info);
  REQUIRE(info.objective_trace.size() > 2);
  for (size_t i = 1; i < info.objective_trace.size(); ++i)
    CHECK(info.objective_trace[i] <= info.objective_trace[i - 1] + 1e-15);
}

TEST_CASE("row permutation changes the solution by less than 1e-8") {
  Rng rng(7);
  Toy toy = random_toy(rng, 50, 6, 2);
  for (Penalty p : {Penalty::l2, Penalty::l1}) {
    SolverConfig cfg;
    cfg.penalty = p;
    cfg.inverse_strength_c = 0.2;
    cfg.tolerance = 1e-12;
    cfg.max_iters = 300000;
    const LinearHead a = fit_logreg(toy.X, toy.y, 2, cfg, identity_scaler(6));

    std::vector<size_t> perm(50);
    std::iota(perm.begin(), perm.end(), size_t{0});
    Rng prng(8);
    prng.shuffle(perm);
    Eigen::MatrixXd Xp(50, 6);
    std::vector<int32_t> yp(50);
    for (int i = 0; i < 50; ++i) {
      Xp.row(i) = toy.X.row(static_cast<Eigen::Index>(perm[static_cast<size_t>(i)]));
      yp[static_cast<size_t>(i)] = toy.y[perm[static_cast<size_t>(i)]];
    }
    const LinearHead b = fit_logreg(Xp, yp, 2, cfg, identity_scaler(6));
    CHECK((a.W - b.W).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((a.b - b.b).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("scaling all class weights matches scaling C by the same factor") {
  Rng rng(9);
  Toy toy = random_toy(rng, 60, 5, 3);
  const double k = 4.0;
  SolverConfig a;
  a.penalty = Penalty::l1;
  a.inverse_strength_c = 0.5;
  a.class_weights = {k, k, k};
  a.tolerance = 1e-11;
  a.max_iters = 200000;
  // Multiplying all weights by k multiplies the data term by k; dividing
  // lambda by k (i.e. multiplying C by k) restores the same minimizer.
  SolverConfig b = a;
  b.class_weights = {1.0, 1.0, 1.0};
  b.inverse_strength_c = 0.5 * k;
  const LinearHead ha = fit_logreg(toy.X, toy.y, 3, a, identity_scaler(5));
  const LinearHead hb = fit_logreg(toy.X, toy.y, 3, b, identity_scaler(5));
  CHECK((ha.W - hb.W).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((ha.b - hb.b).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("prediction semantics") {
  LinearHead head{Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3),
                  identity_scaler(2)};
  Eigen::MatrixXf X = Eigen::MatrixXf::Random(4, 2);
  const auto proba = predict_proba(head, X);
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 3; ++c)
      CHECK(proba(i, c) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  // All-equal logits: ties resolve to the lowest class index.
  for (int32_t v : predict_labels(head, X)) CHECK(v == 0);

  Rng rng(10);
  LinearHead h2{Eigen::MatrixXd(3, 2), Eigen::VectorXd(3), identity_scaler(2)};
  for (Eigen::Index i = 0; i < h2.W.size(); ++i) h2.W.data()[i] = rng.normal();
  for (int c = 0; c < 3; ++c) h2.b(c) = rng.normal();
  LinearHead doubled = h2;
  doubled.W *= 2.0;
  doubled.b *= 2.0;
  CHECK(predict_labels(h2, X) == predict_labels(doubled, X));

  const auto logits = predict_logits(h2, X);
  const auto p = predict_proba(h2, X);
  for (int i = 0; i < 4; ++i) {
    double denom = 0.0;
    for (int c = 0; c < 3; ++c) denom += std::exp(logits(i, c));
    for (int c = 0; c < 3; ++c)
      CHECK(p(i, c) ==
            doctest::Approx(std::exp(logits(i, c)) / denom).epsilon(1e-12));
    CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("average_weights semantics and guards") {
  Rng rng(11);
  LinearHead h{Eigen::MatrixXd(2, 3), Eigen::VectorXd(2), identity_scaler(3)};
  for (Eigen::Index i = 0; i < h.W.size(); ++i) h.W.data()[i] = rng.normal();
  h.b << 0.5, -0.5;

  const auto one = average_weights({h});
  CHECK(one.W == h.W);
  CHECK(one.b == h.b);

  LinearHead neg = h;
  neg.W = -h.W;
  neg.b = -h.b;
  const auto sym = average_weights({h, neg});
  CHECK(sym.W.cwiseAbs().maxCoeff() == 0.0);

  const auto triple = average_weights({h, h, h});
  CHECK(triple.W == h.W);

  LinearHead other_scaler = h;
  other_scaler.scaler.mean(0) = 1.0;
  CHECK_THROWS(average_weights({h, other_scaler}));
  LinearHead other_dim{Eigen::MatrixXd::Zero(2, 4), Eigen::VectorXd::Zero(2),
                       identity_scaler(4)};
  CHECK_THROWS(average_weights({h, other_dim}));
}

TEST_CASE("head checkpoint round trip is exact") {
  Rng rng(12);
  LinearHead h{Eigen::MatrixXd(3, 4), Eigen::VectorXd(3), identity_scaler(4)};
  for (Eigen::Index i = 0; i < h.W.size(); ++i) h.W.data()[i] = rng.normal();
  for (int c = 0; c < 3; ++c) h.b(c) = rng.normal();
  h.scaler.mean(1) = 0.25;
  h.scaler.std(2) = 3.5;
  const std::string path = "test_head_roundtrip.dfrh";
  save_head(h, path);
  const auto back = load_head(path);
  CHECK(back.W == h.W);
  CHECK(back.b == h.b);
  CHECK(back.scaler.mean == h.scaler.mean);
  CHECK(back.scaler.std == h.scaler.std);
  std::remove(path.c_str());
}

TEST_CASE("fit guards: missing class, non-convergence flag") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(10, 3);
  std::vector<int32_t> y(10, 0);  // class 1 absent
  SolverConfig cfg;
  CHECK_THROWS(fit_logreg(X, y, 2, cfg, identity_scaler(3)));

  Rng rng(13);
  Toy toy = random_toy(rng, 100, 10, 3);
  SolverConfig tiny;
  tiny.max_iters = 3;
  FitInfo info;
  fit_logreg(toy.X, toy.y, 3, tiny, identity_scaler(10), &info);
  CHECK_FALSE(info.converged);
  CHECK(std::isfinite(info.objective));
}

TEST_CASE("coordinate-descent oracle agrees with the solver on random instances") {
  Rng rng(14);
  for (int t = 0; t < 5; ++t) {
    Toy toy = random_toy(rng, 60, 6, 2 + t % 2);
    SolverConfig cfg;
    cfg.penalty = Penalty::l1;
    cfg.inverse_strength_c = 0.4;
    cfg.tolerance = 1e-9;
    cfg.max_iters = 100000;
    FitInfo info;
    fit_logreg(toy.X, toy.y, toy.C, cfg, identity_scaler(6), &info);
    const std::vector<double> ones(60, 1.0);
    const auto cd = oracle::coordinate_descent(toy.X, toy.y, toy.C, ones,
                                               Penalty::l1, 0.4, 3000, 1e-13);
    CHECK(std::abs(cd.objective - info.objective) /
              std::max(std::abs(info.objective), 1e-12) <
          1e-6);
  }
}
