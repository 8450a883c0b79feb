#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "osco/ini.hpp"
#include "osco/scm.hpp"

using namespace osco;

namespace {

std::string chain_text() {
  return serialize_scm(builtin_benchmark("chain"));
}

double column_mean(const std::vector<SampleRow>& rows, const std::string& v) {
  double s = 0.0;
  for (const auto& r : rows) s += r.at(v);
  return s / static_cast<double>(rows.size());
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("builtin benchmarks validate") {
  for (const auto& name : benchmark_names()) {
    CAPTURE(name);
    CHECK(validate(builtin_benchmark(name)).ok());
  }
  CHECK(builtin_benchmark("chain").domains.at("Z").lo == -5.0);
  CHECK(builtin_benchmark("chain").domains.at("Z").hi == 20.0);
  CHECK(builtin_benchmark("psa").manipulative == VarSet{"C", "D"});
  const auto& mab = builtin_benchmark("synthetic_mab");
  CHECK(mab.functions.at("Y").text().find("xor") != std::string::npos);
  CHECK_THROWS_AS(builtin_benchmark("nope"), std::invalid_argument);
}

TEST_CASE("validation finds broken specs") {
  ScmSpec loop = builtin_benchmark("chain");
  loop.graph.add_edge("Y", "Y");
  const auto rep = validate(loop);
  REQUIRE_FALSE(rep.ok());
  CHECK(rep.issues.front().find("cycle") != std::string::npos);

  std::string text = chain_text();
  const auto at = text.find("X = e_X");
  text.replace(at, 7, "X = e_X + e_Y");
  const ScmSpec shared = parse_scm(text, "shared");
  const auto rep2 = validate(shared);
  REQUIRE_FALSE(rep2.ok());
  bool mention = false;
  for (const auto& i : rep2.issues) mention = mention || i.find("bidirected") != std::string::npos;
  CHECK(mention);
}

TEST_CASE("parse errors carry line numbers") {
  try {
    parse_scm("[nodes]\norder = A\n[bogus]\nx = 1\n", "bad");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_scm("[nodes]\norder = A\n[functions]\nA = exp(\n", "bad"), ParseError);
}

TEST_CASE("serialisation round-trips") {
  for (const auto& name : benchmark_names()) {
    const ScmSpec& spec = builtin_benchmark(name);
    const ScmSpec back = parse_scm(serialize_scm(spec), name);
    CAPTURE(name);
    CHECK(serialize_scm(back) == serialize_scm(spec));
    CHECK(back.graph == spec.graph);
  }
}

TEST_CASE("mutilation") {
  const CausalGraph& g = builtin_benchmark("chain_uc").graph;
  const CausalGraph m = mutilate(g, {"X"});
  CHECK(m.bidirected().empty());
  CHECK(m.directed() == std::set<Edge>{{"X", "Z"}, {"Z", "Y"}});
  CHECK(mutilate(g, {}) == g);

  const CausalGraph& syn = builtin_benchmark("synthetic").graph;
  const CausalGraph mb = mutilate(syn, {"B"});
  CHECK(mb.directed().count({"S", "B"}) == 0);
  CHECK(mb.directed().size() + 1 == syn.directed().size());
  CHECK_THROWS_AS(mutilate(g, {"Q"}), std::invalid_argument);
}

TEST_CASE("property: mutilation is idempotent and monotone") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("V" + std::to_string(i));
    CausalGraph g(names);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        if (rng() % 2) g.add_edge(names[i], names[j]);
        if (rng() % 5 == 0) g.add_bidirected(names[i], names[j]);
      }
    VarSet x, w;
    for (const auto& v : names) {
      if (rng() % 3 == 0) x.insert(v);
      if (rng() % 3 == 0) w.insert(v);
    }
    const CausalGraph mx = mutilate(g, x);
    CHECK(mutilate(mx, x) == mx);
    VarSet xw = x;
    xw.insert(w.begin(), w.end());
    const CausalGraph mxw = mutilate(g, xw);
    CHECK(std::includes(mx.directed().begin(), mx.directed().end(), mxw.directed().begin(),
                        mxw.directed().end()));
    CHECK(std::includes(mx.bidirected().begin(), mx.bidirected().end(), mxw.bidirected().begin(),
                        mxw.bidirected().end()));
  }
}

TEST_CASE("observational sampling") {
  const ScmSpec& chain = builtin_benchmark("chain");
  const auto rows = sample_observational(chain, {"Z", "Y"}, 10000, 1);
  REQUIRE(rows.size() == 10000);
  CHECK(rows[0].values.size() == 2);
  // E[exp(-X)] for X ~ N(0,1) is exp(1/2); Var = e^2 - e.
  const double sd = std::sqrt(std::exp(2.0) - std::exp(1.0) + 0.25);
  CHECK(std::fabs(column_mean(rows, "Z") - std::exp(0.5)) < 3.0 * sd / 100.0);

  const auto a = sample_observational(chain, {"X", "Z", "Y"}, 1, 99);
  const auto b = sample_observational(chain, {"X", "Z", "Y"}, 1, 99);
  CHECK(a[0].values == b[0].values);

  const auto mab = sample_observational(builtin_benchmark("synthetic_mab"),
                                        builtin_benchmark("synthetic_mab").graph.node_set(), 100000, 2);
  CHECK(std::fabs(column_mean(mab, "Z") - 0.23) < 0.01);

  CHECK_THROWS_AS(sample_observational(chain, {"Q"}, 1, 1), std::invalid_argument);
}

TEST_CASE("interventional sampling") {
  const ScmSpec& chain = builtin_benchmark("chain");
  const auto opt = sample_interventional(chain, Intervention({"Z"}, {-3.2}), 10000, 4);
  CHECK(std::fabs(column_mean(opt, "Y") + 2.17) < 0.05);
  const auto zero = sample_interventional(chain, Intervention({"Z"}, {0.0}), 10000, 4);
  CHECK(std::fabs(column_mean(zero, "Y")) < 0.05);
  for (const auto& r : opt) CHECK(r.at("Z") == -3.2);

  CHECK_THROWS_AS(sample_interventional(chain, Intervention({"Z"}, {25.0}), 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_interventional(chain, Intervention({"Y"}, {0.0}), 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_interventional(chain, Intervention({"Z"}, {0.0, 1.0}), 1, 1),
                  std::invalid_argument);
}

TEST_CASE("PSA interventional mean matches a direct oracle") {
  const ScmSpec& psa = builtin_benchmark("psa");
  const auto rows = sample_interventional(psa, Intervention({"C", "D"}, {0.0, 1.0}), 100000, 8);
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> age(55.0, 75.0);
  std::normal_distribution<double> nb(0.0, 0.7), nf(0.0, 0.4);
  double s = 0.0, s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double a = age(rng);
    const double b = 27.0 - 0.01 * a + nb(rng);
    const double e = sigmoid(2.2 - 0.05 * a + 0.01 * b - 0.04 * 1.0 + 0.02 * 0.0);
    const double f = 6.8 + 0.04 * a - 0.15 * b - 0.60 + e + nf(rng);
    s += f;
    s2 += f * f;
  }
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::fabs(column_mean(rows, "F") - mean) < 3.0 * std::sqrt(2.0) * se);
}

TEST_CASE("ground truth oracle") {
  const ScmSpec& chain = builtin_benchmark("chain");
  const MeanEstimate m = mc_ground_truth(chain, Intervention({"Z"}, {-3.2}), 100000);
  CHECK(std::fabs(m.mean + 2.17) < 0.05);
  CHECK(m.std_error < 0.001);

  // The null intervention is the observational mean of Y.
  const ScmSpec& uc = builtin_benchmark("chain_uc");
  const MeanEstimate obs = mc_ground_truth(uc, Intervention(), 50000, 3);
  const auto rows = sample_observational(uc, {"Y"}, 50000, 5);
  CHECK(std::fabs(obs.mean - column_mean(rows, "Y")) < 4.0 * std::sqrt(2.0) * obs.std_error);

  // Bernoulli enumeration against simulation.
  const ScmSpec& mab = builtin_benchmark("synthetic_mab");
  const Intervention iv({"X", "W"}, {1.0, 0.0});
  const double exact = exact_discrete_mean(mab, iv);
  const MeanEstimate sim = mc_ground_truth(mab, iv, 200000, 9);
  CHECK(std::fabs(exact - sim.mean) < 4.0 * sim.std_error + 1e-12);
}

TEST_CASE("setting all parents of Y matches direct evaluation") {
  const ScmSpec& syn = builtin_benchmark("synthetic");
  const auto rows = sample_interventional(syn, Intervention({"W", "X"}, {0.5, -1.0}), 10000, 12);
  // f_Y = cos(W) + sin(X) + U_SY + U_ZY * e_Y with the declared noise laws.
  std::mt19937_64 rng(77);
  auto noise = [&](const std::string& n) {
    const Noise& law = syn.noise.at(n);
    std::normal_distribution<double> d(law.a, law.b);
    return d(rng);
  };
  std::vector<double> direct, sampled;
  for (int i = 0; i < 10000; ++i)
    direct.push_back(std::cos(0.5) + std::sin(-1.0) + noise("U_SY") + noise("U_ZY") * noise("e_Y"));
  for (const auto& r : rows) sampled.push_back(r.at("Y"));
  // Critical value for alpha = 0.01 with n = m = 10^4.
  CHECK(ks_statistic(direct, sampled) < 1.628 * std::sqrt(2.0 / 10000.0));
}

TEST_CASE("property: fixed seeds reproduce samples bit for bit") {
  for (const auto& name : benchmark_names()) {
    const ScmSpec& spec = builtin_benchmark(name);
    const auto a = sample_observational(spec, spec.graph.node_set(), 50, 17);
    const auto b = sample_observational(spec, spec.graph.node_set(), 50, 17);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);
  }
}
