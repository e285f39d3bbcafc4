// Apache License, Version 2.0, refer to LICENSE.txt

#include "iiacheck/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "iiacheck/dataset_io.hpp"
#include "iiacheck/rng.hpp"

namespace iia {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Log-sum-exp over the first `n` entries of u (max-subtraction).
double lse(const double* u, std::size_t n) {
  double m = u[0];
  for (std::size_t k = 1; k < n; ++k) m = std::max(m, u[k]);
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += std::exp(u[k] - m);
  return m + std::log(s);
}

}  // namespace

ModelSpec ModelSpec::defaults(ModelKind kind) {
  ModelSpec spec;
  spec.kind = kind;
  spec.alpha_sigma = (kind == ModelKind::iia) ? 2.0 : 1.5;
  spec.beta_sigma = 1.0;
  return spec;
}

void ModelSpec::validate() const {
  if (!(alpha_sigma > 0.0) || !std::isfinite(alpha_sigma)) {
    throw ValidationError("alpha_sigma must be positive and finite");
  }
  if (!(beta_sigma > 0.0) || !std::isfinite(beta_sigma)) {
    throw ValidationError("beta_sigma must be positive and finite");
  }
}

PosteriorModel::PosteriorModel(ModelSpec spec, const Dataset& data)
    : spec_(spec) {
  spec_.validate();
  if (data.size() == 0) {
    throw ValidationError("posterior model needs at least one question set");
  }
  const bool perturbed = spec_.perturbed();
  int next = perturbed ? 2 : 1;  // 0: log_sigma, 1: log perturbation scale
  layouts_.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    layouts_.push_back(SetLayout::build(data.sets[i], data.tables[i]));
    targets_.push_back(data.sets[i].target);
    std::vector<std::string> qids;
    for (const Question& q : data.sets[i].questions) qids.push_back(q.id);
    question_ids_.push_back(std::move(qids));
    s_off_.push_back(next);
    next += static_cast<int>(layouts_.back().num_items());
  }
  for (const SetLayout& lay : layouts_) {
    std::vector<int> eoff;
    std::vector<int> coff;
    for (const auto& cells : lay.choice_idx) {
      coff.push_back(total_cells_);
      total_cells_ += static_cast<int>(cells.size());
      // A full-menu question (its choice set covers every item of the set)
      // pins the baseline scores and carries no perturbation latents.
      const bool full_menu = cells.size() == lay.num_items();
      if (full_menu || spec_.kind == ModelKind::iia) {
        eoff.push_back(-1);
      } else if (spec_.kind == ModelKind::additive) {
        eoff.push_back(next);
        next += static_cast<int>(cells.size());
      } else {  // multiplicative
        eoff.push_back(next);
        next += 1;
      }
    }
    eps_off_.push_back(std::move(eoff));
    cell_off_.push_back(std::move(coff));
  }
  dim_ = next;
}

double PosteriorModel::logp_grad(const Eigen::VectorXd& q,
                                 Eigen::VectorXd& grad) const {
  if (q.size() != dim_) {
    throw ValidationError("posterior point has wrong dimension");
  }
  grad.setZero(dim_);

  const double log_sigma = q[0];
  const double sigma = std::exp(log_sigma);
  double logp = 0.0;

  // Half-normal prior on sigma via log transform (plus Jacobian):
  //   logp += -sigma^2 / (2 alpha^2) + log_sigma
  logp += -sigma * sigma / (2.0 * spec_.alpha_sigma * spec_.alpha_sigma) +
          log_sigma;
  grad[0] += 1.0 - sigma * sigma / (spec_.alpha_sigma * spec_.alpha_sigma);

  double scale_p = 0.0;
  if (spec_.perturbed()) {
    const double log_scale = q[1];
    scale_p = std::exp(log_scale);
    logp += -scale_p * scale_p / (2.0 * spec_.beta_sigma * spec_.beta_sigma) +
            log_scale;
    grad[1] += 1.0 - scale_p * scale_p / (spec_.beta_sigma * spec_.beta_sigma);
  }

  // Standard normal priors on every non-centered latent.
  for (int j = spec_.perturbed() ? 2 : 1; j < dim_; ++j) {
    logp += -0.5 * q[j] * q[j];
    grad[j] += -q[j];
  }

  double u[kMaxChoiceSetSize];
  double pi[kMaxChoiceSetSize];
  for (std::size_t i = 0; i < layouts_.size(); ++i) {
    const SetLayout& lay = layouts_[i];
    const int s0 = s_off_[i];
    for (std::size_t qi = 0; qi < lay.num_questions(); ++qi) {
      const auto& cells = lay.choice_idx[qi];
      const auto& counts = lay.counts[qi];
      const double n = lay.totals[qi];
      if (n <= 0.0) continue;
      const std::size_t kk = cells.size();
      const int e0 = eps_off_[i][qi];
      // Unperturbed questions (plain model, or a full-menu question of a
      // perturbation model) take the plain likelihood.
      const ModelKind qkind = (e0 >= 0) ? spec_.kind : ModelKind::iia;
      double eps_q = 1.0;  // multiplicative per-question factor
      if (qkind == ModelKind::multiplicative) {
        eps_q = 1.0 + scale_p * q[e0];
      }
      for (std::size_t k = 0; k < kk; ++k) {
        const double s = sigma * q[s0 + cells[k]];
        switch (qkind) {
          case ModelKind::iia:
            u[k] = s;
            break;
          case ModelKind::additive:
            u[k] = s + scale_p * q[e0 + static_cast<int>(k)];
            break;
          case ModelKind::multiplicative:
            u[k] = s * eps_q;
            break;
        }
      }
      const double z = lse(u, kk);
      if (!std::isfinite(z)) return kNegInf;
      double r_dot_s = 0.0;  // sum_k r_k * s_k (for the multiplicative scale)
      for (std::size_t k = 0; k < kk; ++k) {
        pi[k] = std::exp(u[k] - z);
        logp += counts[k] * (u[k] - z);
        const double r = counts[k] - n * pi[k];
        const double s = sigma * q[s0 + cells[k]];
        switch (qkind) {
          case ModelKind::iia:
            grad[s0 + cells[k]] += sigma * r;
            grad[0] += r * s;  // du/dlog_sigma = s
            break;
          case ModelKind::additive: {
            grad[s0 + cells[k]] += sigma * r;
            grad[0] += r * s;
            const int ej = e0 + static_cast<int>(k);
            grad[ej] += scale_p * r;
            grad[1] += r * scale_p * q[ej];  // du/dlog_scale = eps part
            break;
          }
          case ModelKind::multiplicative:
            grad[s0 + cells[k]] += sigma * eps_q * r;
            grad[0] += r * s * eps_q;  // du/dlog_sigma = u
            r_dot_s += r * s;
            break;
        }
      }
      if (qkind == ModelKind::multiplicative) {
        grad[e0] += scale_p * r_dot_s;
        grad[1] += (eps_q - 1.0) * r_dot_s;  // chain rule through log scale
      }
    }
  }
  if (!std::isfinite(logp)) return kNegInf;
  return logp;
}

double PosteriorModel::log_density(const Eigen::VectorXd& q) const {
  Eigen::VectorXd grad(dim_);
  return logp_grad(q, grad);
}

double PosteriorModel::likelihood_term(const Eigen::VectorXd& q) const {
  if (q.size() != dim_) {
    throw ValidationError("posterior point has wrong dimension");
  }
  std::vector<double> flat(static_cast<std::size_t>(total_cells_));
  fill_probabilities(q, flat);
  double ll = 0.0;
  for (std::size_t i = 0; i < layouts_.size(); ++i) {
    const SetLayout& lay = layouts_[i];
    for (std::size_t qi = 0; qi < lay.num_questions(); ++qi) {
      const auto& counts = lay.counts[qi];
      if (lay.totals[qi] <= 0.0) continue;
      const int off = cell_off_[i][qi];
      for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] > 0.0) {
          ll += counts[k] * std::log(flat[static_cast<std::size_t>(off) + k]);
        }
      }
    }
  }
  return ll;
}

void PosteriorModel::fill_probabilities(const Eigen::VectorXd& q,
                                        std::vector<double>& flat) const {
  if (q.size() != dim_) {
    throw ValidationError("posterior point has wrong dimension");
  }
  flat.resize(static_cast<std::size_t>(total_cells_));
  const double sigma = std::exp(q[0]);
  const double scale_p = spec_.perturbed() ? std::exp(q[1]) : 0.0;
  double u[kMaxChoiceSetSize];
  for (std::size_t i = 0; i < layouts_.size(); ++i) {
    const SetLayout& lay = layouts_[i];
    const int s0 = s_off_[i];
    for (std::size_t qi = 0; qi < lay.num_questions(); ++qi) {
      const auto& cells = lay.choice_idx[qi];
      const std::size_t kk = cells.size();
      const int e0 = eps_off_[i][qi];
      const ModelKind qkind = (e0 >= 0) ? spec_.kind : ModelKind::iia;
      double eps_q = 1.0;
      if (qkind == ModelKind::multiplicative) {
        eps_q = 1.0 + scale_p * q[e0];
      }
      for (std::size_t k = 0; k < kk; ++k) {
        const double s = sigma * q[s0 + cells[k]];
        switch (qkind) {
          case ModelKind::iia:
            u[k] = s;
            break;
          case ModelKind::additive:
            u[k] = s + scale_p * q[e0 + static_cast<int>(k)];
            break;
          case ModelKind::multiplicative:
            u[k] = s * eps_q;
            break;
        }
      }
      softmax_inplace(std::span<double>(u, kk));
      const int off = cell_off_[i][qi];
      for (std::size_t k = 0; k < kk; ++k) {
        flat[static_cast<std::size_t>(off) + k] = u[k];
      }
    }
  }
}

double PosteriorModel::perturb_scale_of(const Eigen::VectorXd& q) const {
  if (!spec_.perturbed()) {
    throw ValidationError("model has no perturbation scale");
  }
  return std::exp(q[1]);
}

std::string PosteriorModel::perturb_scale_name() const {
  switch (spec_.kind) {
    case ModelKind::additive:
      return "sigma_p";
    case ModelKind::multiplicative:
      return "sigma_m";
    case ModelKind::iia:
      return "";
  }
  return "";
}

std::vector<std::string> PosteriorModel::coordinate_names() const {
  std::vector<std::string> names(static_cast<std::size_t>(dim_));
  names[0] = "log_sigma";
  if (spec_.perturbed()) names[1] = "log_" + perturb_scale_name();
  for (std::size_t i = 0; i < layouts_.size(); ++i) {
    const SetLayout& lay = layouts_[i];
    for (std::size_t k = 0; k < lay.num_items(); ++k) {
      names[static_cast<std::size_t>(s_off_[i]) + k] =
          "z_s[" + targets_[i] + "|" + lay.items[k] + "]";
    }
    for (std::size_t qi = 0; qi < lay.num_questions(); ++qi) {
      const std::string& qid = question_ids_[i][qi];
      if (eps_off_[i][qi] < 0) continue;  // unperturbed question
      if (spec_.kind == ModelKind::additive) {
        const auto& cells = lay.choice_idx[qi];
        for (std::size_t k = 0; k < cells.size(); ++k) {
          names[static_cast<std::size_t>(eps_off_[i][qi]) + k] =
              "z_eps[" + qid + "|" + lay.items[static_cast<std::size_t>(cells[k])] + "]";
        }
      } else if (spec_.kind == ModelKind::multiplicative) {
        names[static_cast<std::size_t>(eps_off_[i][qi])] = "z_eps[" + qid + "]";
      }
    }
  }
  return names;
}

long PosteriorDraws::total_draws() const {
  long n = 0;
  for (const auto& c : chains) n += c.rows();
  return n;
}

namespace {

std::vector<Eigen::VectorXd> column_chains(
    const std::vector<Eigen::MatrixXd>& chains, int col) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(chains.size());
  for (const auto& c : chains) out.push_back(c.col(col));
  return out;
}

std::vector<Eigen::VectorXd> exp_column_chains(
    const std::vector<Eigen::MatrixXd>& chains, int col) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(chains.size());
  for (const auto& c : chains) out.push_back(c.col(col).array().exp().matrix());
  return out;
}

}  // namespace

PosteriorDraws sample_posterior(const PosteriorModel& model,
                                const NutsConfig& config) {
  LogDensityGradient target = [&model](const Eigen::VectorXd& q,
                                       Eigen::VectorXd& grad) {
    return model.logp_grad(q, grad);
  };
  RngStream root = RngStream(config.seed).derive("posterior");
  NutsResult res = nuts_sample(model.dim(), target, config, root);

  PosteriorDraws draws;
  draws.spec = model.spec();
  draws.diag.divergences = res.total_divergences();
  draws.diag.divergence_fraction = res.divergence_fraction();
  draws.diag.chain_stats = res.stats;
  for (const ChainStats& cs : res.stats) {
    draws.diag.max_depth_hits += cs.max_depth_hits;
    if (cs.divergences >= config.draws) {
      std::ostringstream msg;
      msg << "sampling failed: a chain diverged on every draw ("
          << res.total_divergences() << "/" << res.total_draws()
          << " divergent overall); step size " << cs.step_size;
      throw SamplerError(msg.str());
    }
  }
  draws.chains = std::move(res.chains);

  draws.diag.rhat_sigma = split_rhat(exp_column_chains(draws.chains, 0));
  draws.diag.ess_sigma = effective_sample_size(exp_column_chains(draws.chains, 0));
  if (model.spec().perturbed()) {
    draws.diag.rhat_perturb = split_rhat(exp_column_chains(draws.chains, 1));
    draws.diag.ess_perturb =
        effective_sample_size(exp_column_chains(draws.chains, 1));
  }
  double worst = 0.0;
  for (int j = 0; j < model.dim(); ++j) {
    worst = std::max(worst, split_rhat(column_chains(draws.chains, j)));
  }
  draws.diag.rhat_max = worst;
  return draws;
}

namespace {

// How to turn one draw row into the named scalar.
struct ScalarRecipe {
  enum class Op { exp_col, raw_col, sigma_times_col, scale_times_col, one_plus_scale_times_col };
  Op op = Op::raw_col;
  int col = 0;

  double eval(const Eigen::MatrixXd& chain, int row) const {
    switch (op) {
      case Op::exp_col:
        return std::exp(chain(row, col));
      case Op::raw_col:
        return chain(row, col);
      case Op::sigma_times_col:
        return std::exp(chain(row, 0)) * chain(row, col);
      case Op::scale_times_col:
        return std::exp(chain(row, 1)) * chain(row, col);
      case Op::one_plus_scale_times_col:
        return 1.0 + std::exp(chain(row, 1)) * chain(row, col);
    }
    return 0.0;
  }
};

ScalarRecipe resolve_scalar(const PosteriorModel& model,
                            const std::string& name) {
  if (name == "sigma") return {ScalarRecipe::Op::exp_col, 0};
  if (model.spec().perturbed() && name == model.perturb_scale_name()) {
    return {ScalarRecipe::Op::exp_col, 1};
  }
  const std::vector<std::string> coords = model.coordinate_names();
  if (name.rfind("s[", 0) == 0 && name.back() == ']') {
    const std::string z = "z_" + name;
    for (std::size_t j = 0; j < coords.size(); ++j) {
      if (coords[j] == z) {
        return {ScalarRecipe::Op::sigma_times_col, static_cast<int>(j)};
      }
    }
  }
  if (name.rfind("eps[", 0) == 0 && name.back() == ']') {
    const std::string z = "z_" + name;
    for (std::size_t j = 0; j < coords.size(); ++j) {
      if (coords[j] == z) {
        if (model.spec().kind == ModelKind::multiplicative) {
          return {ScalarRecipe::Op::one_plus_scale_times_col,
                  static_cast<int>(j)};
        }
        return {ScalarRecipe::Op::scale_times_col, static_cast<int>(j)};
      }
    }
  }
  for (std::size_t j = 0; j < coords.size(); ++j) {
    if (coords[j] == name) return {ScalarRecipe::Op::raw_col, static_cast<int>(j)};
  }
  throw ValidationError("unknown posterior scalar: " + name);
}

}  // namespace

std::vector<Eigen::VectorXd> scalar_chains(const PosteriorModel& model,
                                           const PosteriorDraws& draws,
                                           const std::string& name) {
  const ScalarRecipe recipe = resolve_scalar(model, name);
  std::vector<Eigen::VectorXd> out;
  out.reserve(draws.chains.size());
  for (const auto& chain : draws.chains) {
    Eigen::VectorXd v(chain.rows());
    for (int r = 0; r < chain.rows(); ++r) v[r] = recipe.eval(chain, r);
    out.push_back(std::move(v));
  }
  return out;
}

PosteriorSummary summarize_values(std::vector<double> pooled) {
  if (pooled.empty()) throw ValidationError("no draws to summarize");
  PosteriorSummary s;
  const std::size_t n = pooled.size();
  double mean = 0.0;
  for (double v : pooled) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : pooled) var += (v - mean) * (v - mean);
  var = (n > 1) ? var / static_cast<double>(n - 1) : 0.0;
  std::sort(pooled.begin(), pooled.end());
  auto quantile = [&pooled, n](double p) {
    const double h = p * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double w = h - static_cast<double>(lo);
    return (1.0 - w) * pooled[lo] + w * pooled[hi];
  };
  s.mean = mean;
  s.sd = std::sqrt(var);
  s.q025 = quantile(0.025);
  s.q50 = quantile(0.5);
  s.q975 = quantile(0.975);
  return s;
}

PosteriorSummary posterior_summary(const PosteriorModel& model,
                                   const PosteriorDraws& draws,
                                   const std::string& name) {
  std::vector<double> pooled;
  for (const Eigen::VectorXd& v : scalar_chains(model, draws, name)) {
    pooled.insert(pooled.end(), v.data(), v.data() + v.size());
  }
  return summarize_values(std::move(pooled));
}

std::vector<std::string> trace_scalar_names(const PosteriorModel& model,
                                            bool include_latents) {
  std::vector<std::string> names;
  names.push_back("sigma");
  if (model.spec().perturbed()) names.push_back(model.perturb_scale_name());
  for (int i = 0; i < model.num_sets(); ++i) {
    const SetLayout& lay = model.layout(i);
    for (const std::string& item : lay.items) {
      names.push_back("s[" + model.set_target(i) + "|" + item + "]");
    }
  }
  if (include_latents && model.spec().perturbed()) {
    for (int i = 0; i < model.num_sets(); ++i) {
      const SetLayout& lay = model.layout(i);
      for (std::size_t qi = 0; qi < lay.num_questions(); ++qi) {
        if (!model.question_perturbed(i, static_cast<int>(qi))) continue;
        const std::string& qid = model.question_ids(i)[qi];
        if (model.spec().kind == ModelKind::additive) {
          for (int cell : lay.choice_idx[qi]) {
            names.push_back("eps[" + qid + "|" +
                            lay.items[static_cast<std::size_t>(cell)] + "]");
          }
        } else {
          names.push_back("eps[" + qid + "]");
        }
      }
    }
  }
  return names;
}

void export_draws_csv(const PosteriorModel& model, const PosteriorDraws& draws,
                      const std::vector<std::string>& scalars,
                      const std::string& path) {
  std::vector<ScalarRecipe> recipes;
  recipes.reserve(scalars.size());
  for (const std::string& name : scalars) {
    recipes.push_back(resolve_scalar(model, name));
  }
  std::ostringstream out;
  out << "chain,draw,scalar,value\n";
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const Eigen::MatrixXd& chain = draws.chains[c];
    for (int r = 0; r < chain.rows(); ++r) {
      for (std::size_t j = 0; j < scalars.size(); ++j) {
        out << c << "," << r << "," << csv_quote(scalars[j]) << ","
            << format_number(recipes[j].eval(chain, r)) << "\n";
      }
    }
  }
  write_file_atomic(path, out.str());
}

}  // namespace iia
