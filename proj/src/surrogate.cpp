#include "osco/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace osco {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double rbf(std::span<const double> a, std::span<const double> b, const KernelParams& h) {
  return h.signal_variance * std::exp(-0.5 * sq_dist(a, b) / (h.length_scale * h.length_scale));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

}  // namespace

// ---------------------------------------------------------------------------
// GpModel

GpModel::GpModel(int dim, KernelParams hyper, ScalarFn prior_mean, ScalarFn prior_std_scale)
    : dim_(dim), hyper_(hyper), prior_mean_(std::move(prior_mean)), prior_std_(std::move(prior_std_scale)) {
  if (dim < 0) throw std::invalid_argument("GP dimension must be nonnegative");
  if (!(hyper.length_scale > 0) || !(hyper.signal_variance >= 0) || !(hyper.noise_variance > 0))
    throw std::invalid_argument("GP hyperparameters must be positive");
}

double GpModel::prior_mean(std::span<const double> x) const { return prior_mean_ ? prior_mean_(x) : 0.0; }
double GpModel::prior_std_scale(std::span<const double> x) const { return prior_std_ ? prior_std_(x) : 0.0; }

double GpModel::kernel(std::span<const double> a, std::span<const double> b) const {
  return rbf(a, b, hyper_) + prior_std_scale(a) * prior_std_scale(b);
}

void GpModel::refit() {
  const int n = static_cast<int>(inputs_.size());
  scales_.resize(n);
  targets_.resize(n);
  for (int i = 0; i < n; ++i) {
    scales_[i] = prior_std_scale(inputs_[i]);
    targets_(i) = outputs_[i] - prior_mean(inputs_[i]);
  }
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) k(i, j) = k(j, i) = rbf(inputs_[i], inputs_[j], hyper_) + scales_[i] * scales_[j];

  for (double jitter : {0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4}) {
    Eigen::MatrixXd m = k;
    m.diagonal().array() += hyper_.noise_variance + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) continue;
    chol_ = llt.matrixL();
    if (!(chol_.diagonal().array() > 0.0).all() || !chol_.allFinite()) continue;
    jitter_ = jitter;
    alpha_ = llt.solve(targets_);
    return;
  }
  throw std::runtime_error("GP kernel matrix is not positive definite even with jitter 1e-4");
}

GpModel::Point GpModel::posterior(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) throw std::invalid_argument("GP query has the wrong dimension");
  const double sx = prior_std_scale(x);
  Point p;
  p.mean = prior_mean(x);
  double var = hyper_.signal_variance + sx * sx;
  const int n = size();
  if (n > 0) {
    Eigen::VectorXd kx(n);
    for (int i = 0; i < n; ++i) kx(i) = rbf(x, inputs_[i], hyper_) + sx * scales_[i];
    p.mean += kx.dot(alpha_);
    const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(kx);
    var -= v.squaredNorm();
  }
  p.std = var > 0.0 ? std::sqrt(var) : 0.0;
  return p;
}

std::vector<double> GpModel::mean_gradient(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) throw std::invalid_argument("GP query has the wrong dimension");
  std::vector<double> grad(dim_, 0.0);
  const double l2 = hyper_.length_scale * hyper_.length_scale;
  const int n = size();
  for (int i = 0; i < n; ++i) {
    const double w = alpha_(i) * rbf(x, inputs_[i], hyper_) / l2;
    for (int d = 0; d < dim_; ++d) grad[d] -= w * (x[d] - inputs_[i][d]);
  }
  if (!prior_mean_ && !prior_std_) return grad;

  double scale_weight = 0.0;
  for (int i = 0; i < n; ++i) scale_weight += alpha_(i) * scales_[i];
  std::vector<double> xp(x.begin(), x.end());
  for (int d = 0; d < dim_; ++d) {
    const double h = 1e-5 * std::max(1.0, std::fabs(x[d]));
    xp[d] = x[d] + h;
    const double mp = prior_mean(xp), sp = prior_std_scale(xp);
    xp[d] = x[d] - h;
    const double mm = prior_mean(xp), sm = prior_std_scale(xp);
    xp[d] = x[d];
    grad[d] += (mp - mm) / (2 * h) + scale_weight * (sp - sm) / (2 * h);
  }
  return grad;
}

GpModel GpModel::with_point(std::span<const double> x, double y) const {
  if (static_cast<int>(x.size()) != dim_) throw std::invalid_argument("GP input has the wrong dimension");
  GpModel out = *this;
  out.inputs_.emplace_back(x.begin(), x.end());
  out.outputs_.push_back(y);
  out.refit();
  return out;
}

GpModel fit_gp(const std::vector<std::vector<double>>& inputs, const std::vector<double>& outputs,
               ScalarFn prior_mean, ScalarFn prior_std_scale, const KernelParams& hyper) {
  if (inputs.size() != outputs.size()) throw std::invalid_argument("GP inputs and outputs differ in length");
  if (inputs.empty()) throw std::invalid_argument("fit_gp needs the input dimension; use the GpModel constructor");
  GpModel m(static_cast<int>(inputs.front().size()), hyper, std::move(prior_mean), std::move(prior_std_scale));
  for (const auto& x : inputs)
    if (static_cast<int>(x.size()) != m.dim_) throw std::invalid_argument("GP inputs have mixed dimensions");
  m.inputs_ = inputs;
  m.outputs_ = outputs;
  m.refit();
  return m;
}

GpPosterior gp_posterior(const GpModel& model, const std::vector<std::vector<double>>& queries) {
  GpPosterior out;
  out.means.reserve(queries.size());
  out.stds.reserve(queries.size());
  for (const auto& q : queries) {
    const auto p = model.posterior(q);
    out.means.push_back(p.mean);
    out.stds.push_back(p.std);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Information gain

double information_gain(const std::vector<std::vector<double>>& rows, const KernelParams& hyper) {
  const int n = static_cast<int>(rows.size());
  if (n == 0) return 0.0;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = rbf(rows[i], rows[j], hyper) / hyper.noise_variance;
  m.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw std::runtime_error("information gain matrix is not positive definite");
  return llt.matrixLLT().diagonal().array().log().sum();
}

GainTracker::GainTracker(KernelParams hyper) : hyper_(hyper) {}

double GainTracker::diag_term(std::span<const double> row, Eigen::VectorXd& l) const {
  l.resize(n_);
  for (int i = 0; i < n_; ++i) l(i) = rbf(rows_[i], row, hyper_) / hyper_.noise_variance;
  if (n_ > 0) chol_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solveInPlace(l);
  const double d = 1.0 + hyper_.signal_variance / hyper_.noise_variance - l.squaredNorm();
  // The matrix has eigenvalues >= 1, so d >= 1 up to rounding.
  return std::sqrt(std::max(d, 1.0));
}

GainTracker GainTracker::with_hyper(KernelParams hyper) const {
  GainTracker t(hyper);
  for (const auto& r : rows_) t.add(r);
  return t;
}

double GainTracker::gain_with(std::span<const double> row) const {
  Eigen::VectorXd l;
  return gain_ + std::log(diag_term(row, l));
}

void GainTracker::add(std::span<const double> row) {
  Eigen::VectorXd l;
  const double lnn = diag_term(row, l);
  if (n_ == chol_.rows()) {
    const int cap = std::max(16, 2 * n_);
    Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(cap, cap);
    grown.topLeftCorner(n_, n_) = chol_.topLeftCorner(n_, n_);
    chol_.swap(grown);
  }
  chol_.row(n_).head(n_) = l.transpose();
  chol_(n_, n_) = lnn;
  rows_.emplace_back(row.begin(), row.end());
  ++n_;
  gain_ += std::log(lnn);
}

// ---------------------------------------------------------------------------
// Causal prior

double CausalPrior::Table::interpolate(const std::vector<double>& values, std::span<const double> x) const {
  const size_t dim = axes.size();
  if (x.size() != dim) throw std::invalid_argument("prior query has the wrong dimension");
  if (dim == 0) return values.front();
  std::vector<size_t> lo(dim);
  std::vector<double> w(dim, 0.0);
  for (size_t d = 0; d < dim; ++d) {
    const auto& ax = axes[d];
    if (ax.size() == 1) continue;
    if (finite) {
      // Nearest level.
      size_t best = 0;
      for (size_t i = 1; i < ax.size(); ++i)
        if (std::fabs(ax[i] - x[d]) < std::fabs(ax[best] - x[d])) best = i;
      lo[d] = best;
      continue;
    }
    const double v = std::clamp(x[d], ax.front(), ax.back());
    size_t i = std::upper_bound(ax.begin(), ax.end(), v) - ax.begin();
    i = std::clamp<size_t>(i, 1, ax.size() - 1) - 1;
    lo[d] = i;
    w[d] = (v - ax[i]) / (ax[i + 1] - ax[i]);
  }
  double out = 0.0;
  for (size_t corner = 0; corner < (size_t{1} << dim); ++corner) {
    double weight = 1.0;
    size_t flat = 0;
    for (size_t d = 0; d < dim; ++d) {
      const bool up = (corner >> d) & 1;
      if (up && w[d] == 0.0) {
        weight = 0.0;
        break;
      }
      weight *= up ? w[d] : 1.0 - w[d];
      flat = flat * axes[d].size() + lo[d] + (up ? 1 : 0);
    }
    if (weight != 0.0) out += weight * values[flat];
  }
  return out;
}

double CausalPrior::mean(std::span<const double> x) const { return available_ ? table_->interpolate(table_->means, x) : 0.0; }

double CausalPrior::std_scale(std::span<const double> x) const {
  return available_ ? table_->interpolate(table_->stds, x) : 1.0;
}

ScalarFn CausalPrior::mean_fn() const {
  if (!available_) return [](std::span<const double>) { return 0.0; };
  auto t = table_;
  return [t](std::span<const double> x) { return t->interpolate(t->means, x); };
}

ScalarFn CausalPrior::std_fn() const {
  if (!available_) return [](std::span<const double>) { return 1.0; };
  auto t = table_;
  return [t](std::span<const double> x) { return t->interpolate(t->stds, x); };
}

std::vector<std::vector<double>> CausalPrior::grid_points() const {
  std::vector<std::vector<double>> out;
  if (!table_) return out;
  std::vector<double> cur;
  std::function<void(size_t)> rec = [&](size_t d) {
    if (d == table_->axes.size()) {
      out.push_back(cur);
      return;
    }
    for (double v : table_->axes[d]) {
      cur.push_back(v);
      rec(d + 1);
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

const std::vector<double>& CausalPrior::grid_means() const {
  static const std::vector<double> none;
  return table_ ? table_->means : none;
}

const std::vector<double>& CausalPrior::grid_stds() const {
  static const std::vector<double> none;
  return table_ ? table_->stds : none;
}

CausalPrior build_causal_prior(const Estimand* estimand, const FittedScm* fitted, const std::vector<std::string>& vars,
                               const std::vector<Domain>& domains, const PriorOptions& opts) {
  if (vars.size() != domains.size()) throw std::invalid_argument("prior variables and domains differ in length");
  CausalPrior prior;
  if (!estimand) return prior;
  if (!fitted || fitted->data().empty()) {
    prior.reason_ = "no data";
    return prior;
  }
  auto table = std::make_shared<CausalPrior::Table>();
  const size_t dim = vars.size();
  const int per_dim = opts.points_per_dim > 0 ? opts.points_per_dim : dim == 1 ? 32 : dim == 2 ? 8 : 4;
  table->finite = !domains.empty();
  for (const auto& d : domains) {
    if (d.finite) {
      std::vector<double> lv = d.levels;
      std::sort(lv.begin(), lv.end());
      table->axes.push_back(lv);
    } else {
      table->finite = false;
      std::vector<double> ax(per_dim);
      for (int i = 0; i < per_dim; ++i) ax[i] = per_dim == 1 ? 0.5 * (d.lo + d.hi) : d.lo + d.width() * i / (per_dim - 1);
      table->axes.push_back(ax);
    }
  }
  if (std::any_of(domains.begin(), domains.end(), [](const Domain& d) { return d.finite; }) && !table->finite)
    throw std::invalid_argument("mixed finite and continuous intervention domains are not supported");
  try {
    const EffectEstimator est(*estimand, *fitted, opts.estimator);
    prior.table_ = table;
    for (const auto& p : prior.grid_points()) {
      const EffectEstimate e = est(Intervention(vars, p));
      table->means.push_back(e.mean);
      table->stds.push_back(e.std);
    }
  } catch (const std::exception& e) {
    prior.table_.reset();
    prior.reason_ = e.what();
    return prior;
  }
  prior.available_ = true;
  prior.reason_.clear();
  return prior;
}

// ---------------------------------------------------------------------------
// Acquisition

std::vector<std::vector<double>> scrambled_halton(int n, int dim, std::uint64_t seed) {
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  if (dim < 0 || dim > 16) throw std::invalid_argument("scrambled_halton supports at most 16 dimensions");
  std::mt19937_64 rng(mix_seed(seed, 17));
  // One random digit permutation per (dimension, digit position).
  std::vector<std::vector<std::vector<int>>> perms(dim);
  for (int d = 0; d < dim; ++d) {
    const int b = kPrimes[d];
    const int digits = static_cast<int>(std::ceil(53.0 * std::log(2.0) / std::log(b)));
    perms[d].resize(digits);
    for (auto& p : perms[d]) {
      p.resize(b);
      std::iota(p.begin(), p.end(), 0);
      std::shuffle(p.begin(), p.end(), rng);
    }
  }
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) {
      const int b = kPrimes[d];
      long long k = i + 1;
      double f = 1.0 / b, v = 0.0;
      for (const auto& p : perms[d]) {
        v += f * p[k % b];
        k /= b;
        f /= b;
      }
      out[i][d] = std::min(v, std::nextafter(1.0, 0.0));
    }
  return out;
}

std::vector<std::vector<double>> candidate_points(const std::vector<Domain>& domains, int n, std::uint64_t seed) {
  if (domains.empty()) return {{}};
  const bool finite = std::all_of(domains.begin(), domains.end(), [](const Domain& d) { return d.finite; });
  std::vector<std::vector<double>> out;
  if (finite) {
    out.push_back({});
    for (const auto& d : domains) {
      std::vector<std::vector<double>> next;
      for (const auto& prefix : out)
        for (double v : d.levels) {
          next.push_back(prefix);
          next.back().push_back(v);
        }
      out.swap(next);
    }
    return out;
  }
  out = scrambled_halton(n, static_cast<int>(domains.size()), seed);
  for (auto& p : out)
    for (size_t d = 0; d < domains.size(); ++d) {
      const Domain& dom = domains[d];
      if (dom.finite) {
        const size_t idx = std::min(dom.levels.size() - 1, static_cast<size_t>(p[d] * dom.levels.size()));
        p[d] = dom.levels[idx];
      } else {
        p[d] = dom.lo + p[d] * dom.width();
      }
    }
  return out;
}

double expected_improvement(double mean, double std, double incumbent, double xi) {
  const double imp = incumbent - mean - xi;
  if (!(std > 0.0)) return std::max(imp, 0.0);
  const double z = imp / std;
  return std::max(0.0, imp * normal_cdf(z) + std * normal_pdf(z));
}

Acquisition causal_expected_improvement(const SurrogateBank& bank,
                                        const std::function<double(const VarSet&)>& intervene_cost,
                                        double incumbent, const AcquisitionOptions& opts) {
  if (bank.empty()) throw std::invalid_argument("empty surrogate bank");
  Acquisition best;
  best.value = -std::numeric_limits<double>::infinity();
  std::string best_label;
  std::uint64_t arm = 0;
  for (const auto& [set, s] : bank) {
    const double cost = intervene_cost(set);
    if (!(cost > 0.0)) throw std::invalid_argument("intervention costs must be positive");
    const std::string label = Intervention(s.vars, std::vector<double>(s.vars.size())).set_label();
    for (const auto& x : candidate_points(s.domains, opts.n_candidates, mix_seed(opts.seed, ++arm))) {
      const auto p = s.model.posterior(x);
      const double ei = expected_improvement(p.mean, p.std, incumbent, opts.xi);
      const double v = ei / cost;
      const bool better = v > best.value ||
                          (v == best.value && (label < best_label || (label == best_label && x < best.iv.values)));
      if (better) {
        best.value = v;
        best.ei = ei;
        best.iv = Intervention(s.vars, x);
        best_label = label;
      }
    }
  }
  return best;
}

}  // namespace osco
