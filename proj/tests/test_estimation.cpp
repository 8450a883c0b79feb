#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "oracles.hpp"
#include "osco/estimation.hpp"

using namespace osco;

namespace {

Dataset observe(const ScmSpec& spec, const VarSet& vars, int n, std::uint64_t seed) {
  Dataset d;
  for (auto& r : sample_observational(spec, vars, n, seed)) d.add(std::move(r));
  return d;
}

Estimand estimand_for(const ScmSpec& spec, const VarSet& targets) {
  const IdResult r = identify(spec.graph, targets, spec.target);
  REQUIRE(r.identifiable());
  return *r.estimand;
}

// Binary front-door model: X -> Z -> Y with X <-> Y through U.
const ScmSpec& binary_front_door() {
  static const ScmSpec spec = parse_scm(R"(
[nodes]
order = X, Z, Y
[edges]
Z = X
Y = Z
[bidirected]
u = X, Y
[functions]
X = xor(U, a)
Z = xor(X, b)
Y = xor(Z, U, c)
[noise]
U = bernoulli(0.3)
a = bernoulli(0.2)
b = bernoulli(0.25)
c = bernoulli(0.1)
[domains]
X = {0, 1}
Z = {0, 1}
Y = {0, 1}
[roles]
manipulative = X, Z
non_manipulative = Y
target = Y
bound = 1
)",
                                          "front_door");
  return spec;
}

}  // namespace

TEST_CASE("dataset CSV round-trips bit for bit") {
  const ScmSpec& chain = builtin_benchmark("chain");
  Dataset d = observe(chain, {"Z", "Y"}, 20, 3);
  for (auto& r : sample_interventional(chain, Intervention({"Z"}, {0.1 + 0.2}), 3, 4)) {
    r.cost = 16.0;
    d.add(std::move(r));
  }
  std::stringstream ss;
  write_dataset_csv(ss, d, chain.graph.nodes());
  const std::string first = ss.str();
  const Dataset back = read_dataset_csv(ss);
  CHECK(back.rows.size() == d.rows.size());
  CHECK(back.cumulative_cost == d.cumulative_cost);
  CHECK(back.n_interventions == 3);
  for (size_t i = 0; i < d.rows.size(); ++i) {
    CHECK(back.rows[i].values == d.rows[i].values);
    CHECK(back.rows[i].iv == d.rows[i].iv);
  }
  std::stringstream again;
  write_dataset_csv(again, back, chain.graph.nodes());
  CHECK(again.str() == first);
}

TEST_CASE("node models follow available columns") {
  const ScmSpec& chain = builtin_benchmark("chain");
  const FittedScm f = fit_scm_models(chain, observe(chain, {"Z", "Y"}, 200, 5));
  CHECK(f.has_node_model("Y"));
  CHECK_FALSE(f.has_node_model("Z"));
  CHECK_THROWS_AS(f.node_model("Z"), std::out_of_range);
  const double z0 = 0.0;
  CHECK(std::fabs(f.node_model("Y")->predict({&z0, 1}).mean) < 0.1);
  CHECK_THROWS_AS(fit_scm_models(chain, Dataset{}), std::invalid_argument);
}

TEST_CASE("binary tables equal empirical frequencies") {
  const ScmSpec& mab = builtin_benchmark("synthetic_mab");
  const Dataset d = observe(mab, mab.graph.node_set(), 500, 6);
  const FittedScm f = fit_scm_models(mab, d);
  const auto model = f.node_model("W");
  for (double b : {0.0, 1.0}) {
    int n = 0, ones = 0;
    for (const auto& r : d.rows)
      if (r.at("B") == b) {
        ++n;
        ones += r.at("W") == 1.0;
      }
    CHECK(model->predict({&b, 1}).mean == static_cast<double>(ones) / n);
  }
}

TEST_CASE("empty intervention uses the sample mean") {
  const ScmSpec& uc = builtin_benchmark("chain_uc");
  const Dataset d = observe(uc, uc.graph.node_set(), 400, 8);
  const EffectEstimate e = estimate_causal_effect(estimand_for(uc, {}), uc, d, Intervention());
  double s = 0.0, s2 = 0.0;
  for (const auto& r : d.rows) {
    s += r.at("Y");
    s2 += r.at("Y") * r.at("Y");
  }
  const double mean = s / 400.0;
  const double sd = std::sqrt((s2 - 400.0 * mean * mean) / 399.0);
  CHECK(e.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(e.std == doctest::Approx(sd / 20.0).epsilon(1e-12));
}

TEST_CASE("front-door plug-in equals a hand-written sum") {
  const ScmSpec& fd = binary_front_door();
  REQUIRE(validate(fd).ok());
  const Dataset d = observe(fd, fd.graph.node_set(), 3000, 9);
  std::map<std::vector<double>, double> joint;
  for (const auto& r : d.rows) joint[{r.at("X"), r.at("Z"), r.at("Y")}] += 1.0 / 3000.0;
  auto p = [&](int x, int z, int y) {
    auto it = joint.find({double(x), double(z), double(y)});
    return it == joint.end() ? 0.0 : it->second;
  };
  auto px = [&](int x) { return p(x, 0, 0) + p(x, 0, 1) + p(x, 1, 0) + p(x, 1, 1); };
  auto pxz = [&](int x, int z) { return p(x, z, 0) + p(x, z, 1); };
  const Estimand est = estimand_for(fd, {"X"});
  for (int x : {0, 1}) {
    double oracle = 0.0;
    for (int z : {0, 1}) {
      double inner = 0.0;
      for (int xp : {0, 1}) inner += p(xp, z, 1) / pxz(xp, z) * px(xp);
      oracle += pxz(x, z) / px(x) * inner;
    }
    const EffectEstimate e = estimate_causal_effect(est, fd, d, Intervention({"X"}, {double(x)}));
    CHECK(e.mean == doctest::Approx(oracle).epsilon(1e-12));
    CHECK_FALSE(e.flagged);
    // And the plug-in is close to the truth.
    CHECK(std::fabs(e.mean - exact_discrete_mean(fd, Intervention({"X"}, {double(x)}))) < 0.05);
  }
}

TEST_CASE("property: discrete plug-in equals back-door sums on the empirical joint") {
  const ScmSpec& mab = builtin_benchmark("synthetic_mab");
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset d = observe(mab, mab.graph.node_set(), 400 + 100 * static_cast<int>(seed), seed);
    std::map<std::vector<double>, double> joint;  // (S,B,W,Y)
    for (const auto& r : d.rows) joint[{r.at("S"), r.at("B"), r.at("W"), r.at("Y")}] += 1.0;
    auto count = [&](auto pred) {
      double c = 0.0;
      for (const auto& [k, v] : joint)
        if (pred(k)) c += v;
      return c;
    };
    const Estimand est = estimand_for(mab, {"B", "W"});
    for (double b : {0.0, 1.0})
      for (double w : {0.0, 1.0}) {
        double oracle = 0.0;
        for (double s : {0.0, 1.0}) {
          const double ps = count([&](auto& k) { return k[0] == s; }) / d.rows.size();
          const double cell = count([&](auto& k) { return k[0] == s && k[1] == b && k[2] == w; });
          const double y1 = count([&](auto& k) { return k[0] == s && k[1] == b && k[2] == w && k[3] == 1.0; });
          oracle += ps * (cell > 0 ? y1 / cell : 0.0);
        }
        const EffectEstimate e = estimate_causal_effect(est, mab, d, Intervention({"B", "W"}, {b, w}));
        if (!e.flagged) CHECK(e.mean == doctest::Approx(oracle).epsilon(1e-12));
      }
  }
}

TEST_CASE("back-door estimate on synthetic agrees with the simulator") {
  const ScmSpec& syn = builtin_benchmark("synthetic");
  const Dataset d = observe(syn, {"S", "B", "Y"}, 100000, 21);
  const EffectEstimator est(estimand_for(syn, {"B"}), FittedScm(syn, d), {1000, 4});
  for (double b : {-1.0, 0.0, 1.0}) {
    const Intervention iv({"B"}, {b});
    const EffectEstimate e = est(iv);
    const MeanEstimate truth = mc_ground_truth(syn, iv, 100000, 22);
    CAPTURE(b);
    CAPTURE(e.mean);
    CAPTURE(e.std);
    CAPTURE(truth.mean);
    CHECK(std::fabs(e.mean - truth.mean) <= 3.0 * std::hypot(e.std, truth.std_error));
  }
}

TEST_CASE("chain effect estimates are consistent") {
  const ScmSpec& chain = builtin_benchmark("chain");
  const Estimand est = estimand_for(chain, {"Z"});
  std::vector<double> medians;
  for (int n : {100, 1000, 10000}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const EffectEstimator e(est, FittedScm(chain, observe(chain, {"Z", "Y"}, n, 100 + seed)), {200, seed});
      double err = 0.0;
      for (double z : {-3.0, 0.0, 5.0}) {
        const double truth = std::cos(z) - std::exp(-z / 20.0);
        err += std::fabs(e(Intervention({"Z"}, {z})).mean - truth);
      }
      errs.push_back(err);
    }
    std::nth_element(errs.begin(), errs.begin() + 5, errs.end());
    medians.push_back(errs[5]);
  }
  CAPTURE(medians[0]);
  CAPTURE(medians[1]);
  CAPTURE(medians[2]);
  CHECK(medians[1] <= medians[0]);
  CHECK(medians[2] <= medians[1]);
}

TEST_CASE("simulated observations match the observational law") {
  const ScmSpec& chain = builtin_benchmark("chain");
  const FittedScm f(chain, observe(chain, {"Z", "Y"}, 5000, 31));
  std::vector<double> sim, real;
  for (int i = 0; i < 5000; ++i) sim.push_back(simulate_observation(f, {"Z", "Y"}, 1000 + i).at("Y"));
  for (const auto& r : sample_observational(chain, {"Y"}, 5000, 32)) real.push_back(r.at("Y"));
  CHECK(oracle::ks_statistic(sim, real) < 1.628 * std::sqrt(2.0 / 5000.0));

  const SampleRow row = simulate_observation(f, {"Z", "Y"}, 7);
  CHECK(row.values.size() == 2);
  CHECK(row.kind == RowKind::Observational);
  CHECK(simulate_observation(f, {"Z", "Y"}, 7).values == row.values);
}

TEST_CASE("simulated binary rows match empirical frequencies") {
  const ScmSpec& mab = builtin_benchmark("synthetic_mab");
  const Dataset d = observe(mab, mab.graph.node_set(), 4000, 41);
  double emp = 0.0;
  for (const auto& r : d.rows) emp += r.at("Y");
  emp /= d.rows.size();
  const FittedScm f(mab, d);
  double sim = 0.0;
  for (int i = 0; i < 5000; ++i) sim += simulate_observation(f, mab.graph.node_set(), i).at("Y");
  CHECK(std::fabs(sim / 5000.0 - emp) < 0.02);
}

TEST_CASE("with_row refreshes fitted factors") {
  const ScmSpec& chain = builtin_benchmark("chain");
  const Estimand est = estimand_for(chain, {"Z"});
  const FittedScm f(chain, observe(chain, {"Z", "Y"}, 50, 51));
  const EffectEstimator e(est, f, {100, 1});
  SampleRow row;
  row.values = {{"Z", 1.0}, {"Y", 3.0}};
  const EffectEstimator e2 = e.with_row(row);
  const Intervention iv({"Z"}, {1.0});
  CHECK(e2(iv).mean > e(iv).mean + 0.1);
  CHECK(e.with_row(SampleRow{})(iv).mean == e(iv).mean);
}
