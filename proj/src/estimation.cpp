#include "osco/estimation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <climits>
#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "osco/ini.hpp"

namespace osco {

// ------------------------------------------------------------------ dataset

void Dataset::add(SampleRow row) {
  cumulative_cost += row.cost;
  if (row.kind == RowKind::Observational) {
    ++n_observations;
  } else {
    ++n_interventions;
  }
  rows.push_back(std::move(row));
}

std::vector<const SampleRow*> Dataset::observational_with(const VarSet& vars) const {
  std::vector<const SampleRow*> out;
  for (const auto& r : rows)
    if (r.kind == RowKind::Observational && r.has_all(vars)) out.push_back(&r);
  return out;
}

void write_dataset_csv(std::ostream& os, const Dataset& data, const std::vector<std::string>& nodes) {
  for (const auto& n : nodes) os << n << ',';
  os << "kind,intervention,step,cost\n";
  for (const auto& r : data.rows) {
    for (const auto& n : nodes) {
      if (r.has(n)) os << format_double(r.at(n));
      os << ',';
    }
    os << (r.kind == RowKind::Observational ? "observational" : "interventional") << ','
       << r.iv.values_label() << ',' << r.step << ',' << format_double(r.cost) << '\n';
  }
}

namespace {

std::vector<std::string> split_keep_empty(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s) {
  size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

}  // namespace

Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("empty dataset file");
  const auto header = split_keep_empty(line, ',');
  if (header.size() < 4 || header[header.size() - 4] != "kind")
    throw std::invalid_argument("dataset header must end with kind,intervention,step,cost");
  const size_t n_nodes = header.size() - 4;
  Dataset data;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_keep_empty(line, ',');
    if (cells.size() != header.size())
      throw std::invalid_argument("line " + std::to_string(lineno) + ": wrong number of columns");
    SampleRow row;
    for (size_t i = 0; i < n_nodes; ++i)
      if (!cells[i].empty()) row.values[header[i]] = to_double(cells[i]);
    const std::string& kind = cells[n_nodes];
    if (kind == "observational") {
      row.kind = RowKind::Observational;
    } else if (kind == "interventional") {
      row.kind = RowKind::Interventional;
    } else {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": unknown kind '" + kind + "'");
    }
    for (const auto& part : split(cells[n_nodes + 1], ';')) {
      const size_t eq = part.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("bad intervention '" + part + "'");
      row.iv.targets.push_back(part.substr(0, eq));
      row.iv.values.push_back(to_double(part.substr(eq + 1)));
    }
    row.step = std::stoi(cells[n_nodes + 2]);
    row.cost = to_double(cells[n_nodes + 3]);
    data.add(std::move(row));
  }
  return data;
}

// ------------------------------------------------------------------- models

namespace {

class EmpiricalModel final : public ConditionalModel {
 public:
  EmpiricalModel(std::vector<std::string> outputs, std::vector<std::vector<double>> values)
      : values_(std::move(values)) {
    outputs_ = std::move(outputs);
    n_rows_ = static_cast<int>(values_.size());
    if (values_.empty()) throw std::runtime_error("empirical model needs at least one row");
  }

  Prediction predict(std::span<const double>) const override {
    double s = 0.0, s2 = 0.0;
    for (const auto& v : values_) {
      s += v[0];
      s2 += v[0] * v[0];
    }
    const double n = static_cast<double>(values_.size());
    const double mean = s / n;
    const double var = std::max(0.0, s2 / n - mean * mean);
    return {mean, var / n, var};
  }

  void sample(std::span<const double>, std::mt19937_64& rng, std::span<double> out) const override {
    std::uniform_int_distribution<size_t> pick(0, values_.size() - 1);
    const auto& v = values_[pick(rng)];
    std::copy(v.begin(), v.end(), out.begin());
  }

  std::shared_ptr<const ConditionalModel> with_point(std::span<const double>,
                                                     std::span<const double> y) const override {
    auto m = std::make_shared<EmpiricalModel>(*this);
    m->values_.emplace_back(y.begin(), y.end());
    m->n_rows_ = static_cast<int>(m->values_.size());
    return m;
  }

  double signal_variance() const override { return 0.0; }
  double noise_variance() const override { return predict({}).noise_var; }

 private:
  std::vector<std::vector<double>> values_;
};

// Linear mean by least squares, RBF GP on the residuals of a strided subset.
class GpRegressor final : public ConditionalModel {
 public:
  GpRegressor(const std::string& output, const std::vector<std::string>& inputs,
              const std::vector<std::vector<double>>& x, const std::vector<double>& y, const FitOptions& opts)
      : ell_(opts.length_scale) {
    outputs_ = {output};
    inputs_ = inputs;
    const int n = static_cast<int>(x.size());
    const int d = static_cast<int>(inputs.size());
    n_rows_ = n;
    if (n == 0) throw std::runtime_error("regressor for " + output + " has no rows");

    const int p = lin_dims_ = opts.linear_mean ? d : 0;
    Eigen::MatrixXd a(n, p + 1);
    Eigen::VectorXd yy(n);
    for (int i = 0; i < n; ++i) {
      a(i, 0) = 1.0;
      for (int j = 0; j < p; ++j) a(i, j + 1) = x[i][j];
      yy(i) = y[i];
    }
    Eigen::MatrixXd ata = a.transpose() * a;
    ata.diagonal().array() += 1e-9 * std::max(1, n);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(ata);
    beta_ = ldlt.solve(a.transpose() * yy);
    const Eigen::VectorXd resid = yy - a * beta_;
    const double dof = std::max(1, n - p - 1);
    const double s2 = resid.squaredNorm() / dof;
    cov_beta_ = s2 * ldlt.solve(Eigen::MatrixXd::Identity(p + 1, p + 1));

    noise_var_ = std::max(opts.noise_variance, neighbour_noise(x, resid));
    const double rvar = resid.squaredNorm() / std::max(1, n);
    signal_var_ = std::max(rvar - noise_var_, 1e-6);

    const int stride = std::max(1, (n + opts.gp_max_points - 1) / std::max(1, opts.gp_max_points));
    std::vector<int> idx;
    for (int i = 0; i < n; i += stride) idx.push_back(i);
    const int m = static_cast<int>(idx.size());
    points_.resize(m, d);
    targets_.resize(m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < d; ++j) points_(i, j) = x[idx[i]][j];
      targets_(i) = resid(idx[i]);
    }
    Eigen::MatrixXd k(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j <= i; ++j) k(i, j) = k(j, i) = kernel(points_.row(i), points_.row(j));
    k.diagonal().array() += noise_var_;
    const Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) throw std::runtime_error("residual GP factorisation failed");
    chol_ = llt.matrixL();
    solve_alpha();
  }

  Prediction predict(std::span<const double> x) const override {
    const int d = static_cast<int>(inputs_.size());
    const double lin = mean_part(x);
    Eigen::VectorXd a = design(x);
    const double lin_var = a.dot(cov_beta_ * a);
    const Eigen::Map<const Eigen::RowVectorXd> q(x.data(), d);
    const int m = static_cast<int>(points_.rows());
    Eigen::VectorXd ks(m);
    for (int i = 0; i < m; ++i) ks(i) = kernel(points_.row(i), q);
    const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(ks);
    const double gp_var = std::max(0.0, signal_var_ - v.squaredNorm());
    return {lin + ks.dot(alpha_), lin_var + gp_var, noise_var_};
  }

  void sample(std::span<const double> x, std::mt19937_64& rng, std::span<double> out) const override {
    std::normal_distribution<double> n01(0.0, 1.0);
    out[0] = predict(x).mean + std::sqrt(noise_var_) * n01(rng);
  }

  std::shared_ptr<const ConditionalModel> with_point(std::span<const double> x,
                                                     std::span<const double> y) const override {
    auto g = std::make_shared<GpRegressor>(*this);
    const int d = static_cast<int>(inputs_.size());
    const int m = static_cast<int>(points_.rows());
    const Eigen::Map<const Eigen::RowVectorXd> q(x.data(), d);
    Eigen::VectorXd ks(m);
    for (int i = 0; i < m; ++i) ks(i) = kernel(points_.row(i), q);
    const Eigen::VectorXd l = chol_.triangularView<Eigen::Lower>().solve(ks);
    const double diag = signal_var_ + noise_var_ - l.squaredNorm();
    g->points_.conservativeResize(m + 1, d);
    g->points_.row(m) = q;
    g->targets_.conservativeResize(m + 1);
    g->targets_(m) = y[0] - mean_part(x);
    g->chol_.conservativeResize(m + 1, m + 1);
    g->chol_.col(m).setZero();
    g->chol_.row(m).head(m) = l.transpose();
    g->chol_(m, m) = std::sqrt(std::max(diag, 1e-12));
    g->solve_alpha();
    g->n_rows_ = n_rows_ + 1;
    return g;
  }

  double signal_variance() const override { return signal_var_; }
  double noise_variance() const override { return noise_var_; }

 private:
  Eigen::VectorXd design(std::span<const double> x) const {
    Eigen::VectorXd a(lin_dims_ + 1);
    a(0) = 1.0;
    for (int j = 0; j < lin_dims_; ++j) a(j + 1) = x[j];
    return a;
  }
  double mean_part(std::span<const double> x) const { return design(x).dot(beta_); }

  template <typename A, typename B>
  double kernel(const A& p, const B& q) const {
    return signal_var_ * std::exp(-0.5 * (p - q).squaredNorm() / (ell_ * ell_));
  }

  void solve_alpha() {
    const Eigen::VectorXd t = chol_.triangularView<Eigen::Lower>().solve(targets_);
    alpha_ = chol_.transpose().triangularView<Eigen::Upper>().solve(t);
  }

  // Half the mean squared residual difference between nearest input neighbours.
  static double neighbour_noise(const std::vector<std::vector<double>>& x, const Eigen::VectorXd& r) {
    const int n = static_cast<int>(x.size());
    if (n < 3) return 0.0;
    const int stride = std::max(1, (n + 1999) / 2000);
    std::vector<int> idx;
    for (int i = 0; i < n; i += stride) idx.push_back(i);
    double acc = 0.0;
    for (size_t a = 0; a < idx.size(); ++a) {
      double best = INFINITY;
      int arg = -1;
      for (size_t b = 0; b < idx.size(); ++b) {
        if (a == b) continue;
        double dist = 0.0;
        for (size_t j = 0; j < x[idx[a]].size(); ++j) {
          const double t = x[idx[a]][j] - x[idx[b]][j];
          dist += t * t;
        }
        if (dist < best) {
          best = dist;
          arg = static_cast<int>(b);
        }
      }
      const double diff = r(idx[a]) - r(idx[arg]);
      acc += 0.5 * diff * diff;
    }
    return acc / static_cast<double>(idx.size());
  }

  double ell_;
  int lin_dims_ = 0;
  double noise_var_ = 0.0;
  double signal_var_ = 0.0;
  Eigen::VectorXd beta_;
  Eigen::MatrixXd cov_beta_;
  Eigen::MatrixXd points_;
  Eigen::VectorXd targets_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
};

class TableModel final : public ConditionalModel {
 public:
  TableModel(std::vector<std::string> outputs, std::vector<std::string> inputs,
             const std::vector<std::vector<double>>& rows, std::vector<std::vector<double>> levels)
      : levels_(std::move(levels)) {
    outputs_ = std::move(outputs);
    inputs_ = std::move(inputs);
    for (const auto& r : rows) add(r);
    if (n_rows_ == 0) throw std::runtime_error("table model needs at least one row");
  }

  Prediction predict(std::span<const double> x) const override { return predict_cell(lookup(x)); }

  static Prediction predict_cell(const std::map<std::vector<double>, int>& dist) {
    double n = 0.0, s = 0.0, s2 = 0.0;
    for (const auto& [o, c] : dist) {
      n += c;
      s += c * o[0];
      s2 += c * o[0] * o[0];
    }
    const double mean = s / n;
    const double var = std::max(0.0, s2 / n - mean * mean);
    return {mean, var / n, var};
  }

  void sample(std::span<const double> x, std::mt19937_64& rng, std::span<double> out) const override {
    const auto& dist = lookup(x);
    long total = 0;
    for (const auto& [o, c] : dist) total += c;
    long combos = levels_.empty() ? 0 : 1;
    for (const auto& l : levels_) combos *= static_cast<long>(l.size());
    std::uniform_int_distribution<long> pick(0, total + combos - 1);
    long u = pick(rng);
    if (u >= total) {
      // Pseudo-count: one uniform joint level.
      u -= total;
      for (size_t j = levels_.size(); j-- > 0;) {
        const long m = static_cast<long>(levels_[j].size());
        out[j] = levels_[j][static_cast<size_t>(u % m)];
        u /= m;
      }
      return;
    }
    for (const auto& [o, c] : dist) {
      if (u < c) {
        std::copy(o.begin(), o.end(), out.begin());
        return;
      }
      u -= c;
    }
  }

  std::shared_ptr<const ConditionalModel> with_point(std::span<const double> x,
                                                     std::span<const double> y) const override {
    auto t = std::make_shared<TableModel>(*this);
    std::vector<double> row(x.begin(), x.end());
    row.insert(row.end(), y.begin(), y.end());
    t->add(row);
    return t;
  }

  double signal_variance() const override {
    const Prediction all = predict_cell(marginal_);
    return std::max(0.0, all.noise_var - noise_variance());
  }

  double noise_variance() const override {
    double within = 0.0;
    for (const auto& [in, dist] : cells_) {
      int c = 0;
      for (const auto& [o, k] : dist) c += k;
      within += c * predict_cell(dist).noise_var;
    }
    return within / n_rows_;
  }

 private:
  void add(const std::vector<double>& r) {
    const size_t d = inputs_.size();
    std::vector<double> in(r.begin(), r.begin() + static_cast<long>(d));
    std::vector<double> out(r.begin() + static_cast<long>(d), r.end());
    ++cells_[in][out];
    ++marginal_[out];
    ++n_rows_;
  }

  const std::map<std::vector<double>, int>& lookup(std::span<const double> x) const {
    auto it = cells_.find(std::vector<double>(x.begin(), x.end()));
    return it == cells_.end() ? marginal_ : it->second;
  }

  std::map<std::vector<double>, std::map<std::vector<double>, int>> cells_;
  std::map<std::vector<double>, int> marginal_;
  std::vector<std::vector<double>> levels_;
};

}  // namespace

std::shared_ptr<const ConditionalModel> fit_empirical(const std::vector<std::string>& outputs,
                                                      const std::vector<std::vector<double>>& values) {
  return std::make_shared<EmpiricalModel>(outputs, values);
}

std::shared_ptr<const ConditionalModel> fit_gp_regressor(const std::string& output,
                                                         const std::vector<std::string>& inputs,
                                                         const std::vector<std::vector<double>>& x,
                                                         const std::vector<double>& y,
                                                         const FitOptions& opts) {
  return std::make_shared<GpRegressor>(output, inputs, x, y, opts);
}

std::shared_ptr<const ConditionalModel> fit_table(const std::vector<std::string>& outputs,
                                                  const std::vector<std::string>& inputs,
                                                  const std::vector<std::vector<double>>& rows,
                                                  std::vector<std::vector<double>> output_levels) {
  if (!output_levels.empty() && output_levels.size() != outputs.size())
    throw std::invalid_argument("one level list per table output");
  return std::make_shared<TableModel>(outputs, inputs, rows, std::move(output_levels));
}

// --------------------------------------------------------------- fitted scm

FittedScm::FittedScm(const ScmSpec& spec, Dataset data, FitOptions opts)
    : spec_(&spec),
      data_(std::make_shared<const Dataset>(std::move(data))),
      opts_(opts),
      mutex_(std::make_unique<std::mutex>()) {}

FittedScm::FittedScm(const FittedScm& other)
    : spec_(other.spec_), data_(other.data_), opts_(other.opts_), mutex_(std::make_unique<std::mutex>()) {
  std::lock_guard lock(*other.mutex_);
  cache_ = other.cache_;
}

FittedScm& FittedScm::operator=(const FittedScm& other) {
  if (this == &other) return *this;
  std::map<Key, std::shared_ptr<const ConditionalModel>> copy;
  {
    std::lock_guard lock(*other.mutex_);
    copy = other.cache_;
  }
  std::lock_guard lock(*mutex_);
  spec_ = other.spec_;
  data_ = other.data_;
  opts_ = other.opts_;
  cache_ = std::move(copy);
  return *this;
}

namespace {

std::vector<std::string> topo_sorted(const CausalGraph& g, const VarSet& vs) {
  std::vector<std::string> out;
  for (const auto& v : g.topological_order())
    if (vs.count(v)) out.push_back(v);
  return out;
}

}  // namespace

bool FittedScm::has_node_model(const std::string& node) const {
  spec_->graph.require_known({node});
  VarSet need = spec_->graph.parents(node);
  need.insert(node);
  return !data_->observational_with(need).empty();
}

std::shared_ptr<const ConditionalModel> FittedScm::node_model(const std::string& node) const {
  if (!has_node_model(node)) throw std::out_of_range("no data to fit a model for node '" + node + "'");
  return conditional({node}, topo_sorted(spec_->graph, spec_->graph.parents(node)));
}

std::shared_ptr<const ConditionalModel> FittedScm::conditional(const std::vector<std::string>& outputs,
                                                               const std::vector<std::string>& inputs) const {
  const Key key{outputs, inputs};
  {
    std::lock_guard lock(*mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  auto model = fit_uncached(key);
  std::lock_guard lock(*mutex_);
  return cache_.emplace(key, model).first->second;
}

std::shared_ptr<const ConditionalModel> FittedScm::fit_uncached(const Key& key) const {
  const auto& [outputs, inputs] = key;
  VarSet all(outputs.begin(), outputs.end());
  all.insert(inputs.begin(), inputs.end());
  spec_->graph.require_known(all);
  const auto rows = data_->observational_with(all);
  if (rows.empty()) {
    std::string what = "no observational rows cover P(";
    for (size_t i = 0; i < outputs.size(); ++i) what += (i ? "," : "") + outputs[i];
    what += "|";
    for (size_t i = 0; i < inputs.size(); ++i) what += (i ? "," : "") + inputs[i];
    throw std::runtime_error(what + ")");
  }
  if (spec_->all_finite(all)) {
    std::vector<std::vector<double>> table;
    for (const auto* r : rows) {
      std::vector<double> v;
      for (const auto& n : inputs) v.push_back(r->at(n));
      for (const auto& n : outputs) v.push_back(r->at(n));
      table.push_back(std::move(v));
    }
    std::vector<std::vector<double>> levels;
    for (const auto& n : outputs) levels.push_back(spec_->domains.at(n).levels);
    return fit_table(outputs, inputs, table, std::move(levels));
  }
  if (inputs.empty()) {
    std::vector<std::vector<double>> values;
    for (const auto* r : rows) {
      std::vector<double> v;
      for (const auto& n : outputs) v.push_back(r->at(n));
      values.push_back(std::move(v));
    }
    return fit_empirical(outputs, values);
  }
  if (outputs.size() != 1)
    throw std::runtime_error("joint conditionals of continuous variables are not supported");
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (const auto* r : rows) {
    std::vector<double> v;
    for (const auto& n : inputs) v.push_back(r->at(n));
    x.push_back(std::move(v));
    y.push_back(r->at(outputs[0]));
  }
  return fit_gp_regressor(outputs[0], inputs, x, y, opts_);
}

FittedScm FittedScm::with_row(const SampleRow& row) const {
  Dataset grown = *data_;
  SampleRow r = row;
  r.kind = RowKind::Observational;
  grown.add(std::move(r));
  FittedScm out(*spec_, std::move(grown), opts_);
  std::lock_guard lock(*mutex_);
  for (const auto& [key, model] : cache_) {
    const auto& [outputs, inputs] = key;
    bool covered = true;
    for (const auto& n : outputs) covered = covered && row.has(n);
    for (const auto& n : inputs) covered = covered && row.has(n);
    if (!covered) {
      out.cache_.emplace(key, model);
      continue;
    }
    std::vector<double> x, y;
    for (const auto& n : inputs) x.push_back(row.at(n));
    for (const auto& n : outputs) y.push_back(row.at(n));
    out.cache_.emplace(key, model->with_point(x, y));
  }
  return out;
}

FittedScm fit_scm_models(const ScmSpec& spec, const Dataset& data, const FitOptions& opts) {
  if (data.n_observations == 0) throw std::invalid_argument("fit_scm_models needs observational rows");
  FittedScm fitted(spec, data, opts);
  for (const auto& v : spec.graph.nodes())
    if (fitted.has_node_model(v)) fitted.node_model(v);
  return fitted;
}

// ---------------------------------------------------------------- estimator

EffectEstimator::EffectEstimator(const Estimand& estimand, const FittedScm& fitted, EstimatorOptions opts)
    : estimand_(estimand), fitted_(fitted), opts_(opts) {
  if (!estimand_.root) throw std::invalid_argument("empty estimand");
  if (opts_.n_mc < 1) throw std::invalid_argument("n_mc must be positive");
  discrete_ = fitted_.spec().all_finite(estimand_.variables());
  if (discrete_) {
    plan_discrete();
  } else {
    plan_continuous();
  }
}

EffectEstimator EffectEstimator::with_row(const SampleRow& row) const {
  return EffectEstimator(estimand_, fitted_.with_row(row), opts_);
}

EffectEstimate EffectEstimator::operator()(const Intervention& iv) const {
  if (iv.target_set() != estimand_.intervention)
    throw std::invalid_argument("intervention " + to_string(iv.target_set()) + " does not match estimand " +
                                to_string(estimand_.intervention));
  return discrete_ ? eval_discrete(iv) : eval_continuous(iv);
}

namespace {

double observed_median(const Dataset& data, const std::string& v, const Domain& dom) {
  std::vector<double> vals;
  for (const auto& r : data.rows)
    if (r.kind == RowKind::Observational && r.has(v)) vals.push_back(r.at(v));
  if (vals.empty()) return dom.finite ? dom.levels.front() : 0.5 * (dom.lo + dom.hi);
  std::nth_element(vals.begin(), vals.begin() + static_cast<long>(vals.size() / 2), vals.end());
  return vals[vals.size() / 2];
}

}  // namespace

void EffectEstimator::plan_continuous() {
  struct Raw {
    std::vector<int> outputs, inputs;
    std::vector<std::string> out_names, in_names;
  };
  std::vector<Raw> raw;
  std::vector<bool> is_fixed;
  auto new_symbol = [&](const std::string& v, bool fixed) {
    symbol_var_.push_back(v);
    is_fixed.push_back(fixed);
    return static_cast<int>(symbol_var_.size()) - 1;
  };
  const std::string& target = estimand_.outcome;

  std::function<void(const EstNode&, std::map<std::string, int>)> walk =
      [&](const EstNode& e, std::map<std::string, int> scope) {
        switch (e.kind) {
          case EstNode::Kind::Fixed:
            for (const auto& v : e.vars) {
              const int s = new_symbol(v, true);
              fixed_symbols_.push_back(s);
              if (e.arbitrary)
                arbitrary_levels_[s] = observed_median(fitted_.data(), v, fitted_.spec().domains.at(v));
              scope[v] = s;
            }
            walk(*e.children[0], scope);
            break;
          case EstNode::Kind::Marginal:
            for (const auto& v : e.vars) scope[v] = new_symbol(v, false);
            walk(*e.children[0], scope);
            break;
          case EstNode::Kind::Product:
            for (const auto& c : e.children) walk(*c, scope);
            break;
          case EstNode::Kind::Quotient:
            throw std::runtime_error("quotient estimands need finite domains");
          case EstNode::Kind::Factor: {
            Raw f;
            auto resolve = [&](const std::string& v) {
              auto it = scope.find(v);
              if (it != scope.end()) return it->second;
              if (v != target) throw std::runtime_error("free variable " + v + " in estimand");
              if (target_symbol_ < 0) target_symbol_ = new_symbol(v, false);
              return target_symbol_;
            };
            for (const auto& v : e.vars) {
              f.outputs.push_back(resolve(v));
              f.out_names.push_back(v);
            }
            for (const auto& v : e.given) {
              f.inputs.push_back(resolve(v));
              f.in_names.push_back(v);
            }
            raw.push_back(std::move(f));
            break;
          }
        }
      };
  walk(*estimand_.root, {});
  if (target_symbol_ < 0) throw std::runtime_error("estimand does not mention the outcome");

  // Every non-fixed symbol must be produced by exactly one factor.
  std::vector<int> producers(symbol_var_.size(), 0);
  for (const auto& f : raw)
    for (int s : f.outputs) {
      if (is_fixed[s]) throw std::runtime_error("intervened variable " + symbol_var_[s] + " used as an outcome");
      ++producers[s];
    }
  for (size_t s = 0; s < symbol_var_.size(); ++s)
    if (!is_fixed[s] && producers[s] != 1)
      throw std::runtime_error("variable " + symbol_var_[s] + " is not produced by exactly one factor");

  bool target_read = false;
  for (const auto& f : raw)
    for (int s : f.inputs) target_read = target_read || s == target_symbol_;

  std::vector<bool> bound(symbol_var_.size(), false);
  for (int s : fixed_symbols_) bound[s] = true;
  std::vector<bool> done(raw.size(), false);
  int final_factor = -1;
  for (size_t placed = 0; placed < raw.size();) {
    bool progressed = false;
    for (size_t i = 0; i < raw.size(); ++i) {
      if (done[i]) continue;
      bool ready = true;
      for (int s : raw[i].inputs) ready = ready && bound[s];
      if (!ready) continue;
      done[i] = true;
      ++placed;
      progressed = true;
      for (int s : raw[i].outputs) bound[s] = true;
      const bool is_mean = !target_read && raw[i].outputs.size() == 1 && raw[i].outputs[0] == target_symbol_;
      if (is_mean) {
        final_factor = static_cast<int>(i);
        continue;
      }
      factors_.push_back({raw[i].outputs, raw[i].inputs, fitted_.conditional(raw[i].out_names, raw[i].in_names)});
    }
    if (!progressed) throw std::runtime_error("estimand factors have circular dependencies");
  }
  if (final_factor >= 0) {
    const Raw& f = raw[static_cast<size_t>(final_factor)];
    factors_.push_back({f.outputs, f.inputs, fitted_.conditional(f.out_names, f.in_names)});
    mean_factor_ = static_cast<int>(factors_.size()) - 1;
  }
  joint_shortcut_ = raw.size() == 1 && raw[0].inputs.empty() && fixed_symbols_.empty();
}

EffectEstimate EffectEstimator::eval_continuous(const Intervention& iv) const {
  if (joint_shortcut_) {
    const Factor& f = factors_.front();
    VarSet cols;
    for (int s : f.outputs) cols.insert(symbol_var_[s]);
    double sum = 0.0, sum2 = 0.0;
    const auto rows = fitted_.data().observational_with(cols);
    for (const auto* r : rows) {
      const double y = r->at(estimand_.outcome);
      sum += y;
      sum2 += y * y;
    }
    const double n = static_cast<double>(rows.size());
    const double mean = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum2 - n * mean * mean) / (n - 1)) : 1.0;
    return {mean, std::sqrt(var / n), false};
  }

  std::vector<double> vals(symbol_var_.size(), 0.0);
  for (int s : fixed_symbols_) {
    auto it = arbitrary_levels_.find(s);
    vals[s] = it != arbitrary_levels_.end() ? it->second : iv.value_of(symbol_var_[s]);
  }
  std::mt19937_64 rng(mix_seed(opts_.seed, 11));
  std::vector<double> in, out;
  double sum = 0.0, sum2 = 0.0, sd_sum = 0.0;
  for (int i = 0; i < opts_.n_mc; ++i) {
    for (size_t k = 0; k < factors_.size(); ++k) {
      const Factor& f = factors_[k];
      in.resize(f.inputs.size());
      for (size_t j = 0; j < f.inputs.size(); ++j) in[j] = vals[f.inputs[j]];
      if (static_cast<int>(k) == mean_factor_) {
        const Prediction p = f.model->predict(in);
        vals[target_symbol_] = p.mean;
        sd_sum += std::sqrt(p.mean_var);
        continue;
      }
      out.resize(f.outputs.size());
      f.model->sample(in, rng, out);
      for (size_t j = 0; j < f.outputs.size(); ++j) vals[f.outputs[j]] = out[j];
    }
    const double y = vals[target_symbol_];
    sum += y;
    sum2 += y * y;
  }
  const double n = opts_.n_mc;
  const double mean = sum / n;
  const double mc_var = n > 1 ? std::max(0.0, (sum2 - n * mean * mean) / (n - 1)) / n : 0.0;
  // Conditional-mean errors are shared by all draws, so their stds add up.
  const double param_sd = sd_sum / n;
  return {mean, std::sqrt(mc_var + param_sd * param_sd), false};
}

void EffectEstimator::plan_discrete() {
  std::function<void(const EstNode&)> walk = [&](const EstNode& e) {
    if (e.kind == EstNode::Kind::Fixed && e.arbitrary) {
      for (const auto& v : e.vars) {
        // Most frequent observed level.
        std::map<double, int> counts;
        for (const auto& r : fitted_.data().rows)
          if (r.kind == RowKind::Observational && r.has(v)) ++counts[r.at(v)];
        double best = fitted_.spec().domains.at(v).levels.front();
        int hi = -1;
        for (const auto& [lvl, c] : counts)
          if (c > hi) {
            hi = c;
            best = lvl;
          }
        discrete_arbitrary_[v] = best;
      }
    }
    if (e.kind == EstNode::Kind::Factor) {
      const auto key = std::make_pair(e.vars, e.given);
      if (tables_.count(key)) return;
      VarSet all(e.vars.begin(), e.vars.end());
      all.insert(e.given.begin(), e.given.end());
      CountTable t;
      for (const auto* r : fitted_.data().observational_with(all)) {
        std::vector<double> in, out;
        for (const auto& v : e.given) in.push_back(r->at(v));
        for (const auto& v : e.vars) out.push_back(r->at(v));
        ++t.cells[in][out];
        ++t.cell_totals[in];
        ++t.marginal[out];
        ++t.total;
      }
      if (t.total == 0) throw std::runtime_error("no observational rows cover a factor over " + to_string(all));
      tables_.emplace(key, std::move(t));
      return;
    }
    for (const auto& c : e.children) walk(*c);
  };
  walk(*estimand_.root);
}

double EffectEstimator::eval_node(const EstNode& e, std::map<std::string, double>& env, const Intervention& iv,
                                  bool& flagged) const {
  switch (e.kind) {
    case EstNode::Kind::Factor: {
      const CountTable& t = tables_.at(std::make_pair(e.vars, e.given));
      std::vector<double> in, out;
      for (const auto& v : e.given) in.push_back(env.at(v));
      for (const auto& v : e.vars) out.push_back(env.at(v));
      auto cell = t.cells.find(in);
      if (cell == t.cells.end()) {
        flagged = true;
        auto m = t.marginal.find(out);
        return m == t.marginal.end() ? 0.0 : static_cast<double>(m->second) / t.total;
      }
      auto c = cell->second.find(out);
      return c == cell->second.end() ? 0.0 : static_cast<double>(c->second) / t.cell_totals.at(in);
    }
    case EstNode::Kind::Product: {
      double p = 1.0;
      for (const auto& c : e.children) {
        p *= eval_node(*c, env, iv, flagged);
        if (p == 0.0) break;
      }
      return p;
    }
    case EstNode::Kind::Quotient: {
      const double den = eval_node(*e.children[1], env, iv, flagged);
      if (den == 0.0) return 0.0;
      return eval_node(*e.children[0], env, iv, flagged) / den;
    }
    case EstNode::Kind::Fixed: {
      std::map<std::string, double> saved;
      for (const auto& v : e.vars) {
        if (env.count(v)) saved[v] = env[v];
        env[v] = e.arbitrary ? discrete_arbitrary_.at(v) : iv.value_of(v);
      }
      const double p = eval_node(*e.children[0], env, iv, flagged);
      for (const auto& v : e.vars) {
        if (saved.count(v)) {
          env[v] = saved[v];
        } else {
          env.erase(v);
        }
      }
      return p;
    }
    case EstNode::Kind::Marginal: {
      std::map<std::string, double> saved;
      for (const auto& v : e.vars)
        if (env.count(v)) saved[v] = env[v];
      std::vector<const std::vector<double>*> levels;
      for (const auto& v : e.vars) levels.push_back(&fitted_.spec().domains.at(v).levels);
      std::vector<size_t> pos(e.vars.size(), 0);
      double total = 0.0;
      while (true) {
        for (size_t i = 0; i < e.vars.size(); ++i) env[e.vars[i]] = (*levels[i])[pos[i]];
        total += eval_node(*e.children[0], env, iv, flagged);
        size_t i = 0;
        while (i < pos.size() && ++pos[i] == levels[i]->size()) pos[i++] = 0;
        if (i == pos.size()) break;
      }
      for (const auto& v : e.vars) {
        if (saved.count(v)) {
          env[v] = saved[v];
        } else {
          env.erase(v);
        }
      }
      return total;
    }
  }
  return 0.0;
}

EffectEstimate EffectEstimator::eval_discrete(const Intervention& iv) const {
  const auto& levels = fitted_.spec().domains.at(estimand_.outcome).levels;
  bool flagged = false;
  double mass = 0.0, s = 0.0, s2 = 0.0;
  for (double y : levels) {
    std::map<std::string, double> env{{estimand_.outcome, y}};
    const double p = eval_node(*estimand_.root, env, iv, flagged);
    mass += p;
    s += p * y;
    s2 += p * y * y;
  }
  if (mass <= 0.0) return {0.0, 0.5, true};
  const double mean = s / mass;
  const double var = std::max(0.0, s2 / mass - mean * mean);
  int n = INT32_MAX;
  for (const auto& [key, t] : tables_) n = std::min(n, t.total);
  double sd = std::sqrt(var / std::max(1, n));
  if (flagged) sd = std::max(sd, 0.5);
  return {mean, sd, flagged};
}

EffectEstimate estimate_causal_effect(const Estimand& estimand, const FittedScm& fitted, const Intervention& iv,
                                      const EstimatorOptions& opts) {
  return EffectEstimator(estimand, fitted, opts)(iv);
}

EffectEstimate estimate_causal_effect(const Estimand& estimand, const ScmSpec& spec, const Dataset& data,
                                      const Intervention& iv, const EstimatorOptions& opts) {
  return estimate_causal_effect(estimand, FittedScm(spec, data), iv, opts);
}

// --------------------------------------------------------------- simulation

SampleRow simulate_observation(const FittedScm& fitted, const VarSet& mos, std::uint64_t seed) {
  const CausalGraph& g = fitted.spec().graph;
  g.require_known(mos);
  std::mt19937_64 rng(mix_seed(seed, 13));
  SampleRow row;
  row.kind = RowKind::Observational;
  std::vector<std::string> earlier;
  for (const auto& v : topo_sorted(g, mos)) {
    std::vector<std::string> given = earlier;
    for (bool changed = true; changed;) {
      changed = false;
      for (size_t i = 0; i < given.size(); ++i) {
        VarSet rest(given.begin(), given.end());
        rest.erase(given[i]);
        if (d_separated(g, {v}, {given[i]}, rest)) {
          given.erase(given.begin() + static_cast<long>(i));
          changed = true;
          break;
        }
      }
    }
    const auto model = fitted.conditional({v}, given);
    std::vector<double> in;
    for (const auto& n : given) in.push_back(row.at(n));
    double out = 0.0;
    model->sample(in, rng, std::span<double>(&out, 1));
    row.values[v] = out;
    earlier.push_back(v);
  }
  return row;
}

}  // namespace osco
