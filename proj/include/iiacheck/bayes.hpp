// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef IIACHECK_BAYES_HPP
#define IIACHECK_BAYES_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iiacheck/core.hpp"
#include "iiacheck/sampler.hpp"

namespace iia {

struct ModelSpec {
  ModelKind kind = ModelKind::iia;
  double alpha_sigma = 2.0;  // half-normal scale for the score prior sigma
  double beta_sigma = 1.0;   // half-normal scale for sigma_p / sigma_m

  // Scale conventions per context: HalfNorm(2) for the plain model,
  // HalfNorm(1.5) with HalfNorm(1) on the perturbation scale for the
  // perturbation fits.
  static ModelSpec defaults(ModelKind kind);
  bool perturbed() const { return kind != ModelKind::iia; }
  void validate() const;
};

// Hierarchical choice model over all question sets as a differentiable
// unnormalized log posterior on unconstrained coordinates:
//   q[0]            log sigma          (scores s_ik = sigma * z, non-centered)
//   q[1]            log sigma_p/m      (perturbation kinds only)
//   z_s blocks      one per (set, item)
//   z_eps blocks    additive: one per (perturbed question, cell);
//                   multiplicative: one per perturbed question, eps = 1 + sigma_m z
// A question whose choice set covers every item of its set (the full menu
// that defines the baseline scores — the drop-one design's 4-option base
// question) is never perturbed; reduced menus are. Sets without a full-menu
// question have every question perturbed.
class PosteriorModel {
 public:
  PosteriorModel(ModelSpec spec, const Dataset& data);

  const ModelSpec& spec() const { return spec_; }
  int dim() const { return dim_; }
  int num_sets() const { return static_cast<int>(layouts_.size()); }
  const SetLayout& layout(int i) const { return layouts_[static_cast<std::size_t>(i)]; }
  const std::string& set_target(int i) const { return targets_[static_cast<std::size_t>(i)]; }
  const std::vector<std::string>& question_ids(int i) const {
    return question_ids_[static_cast<std::size_t>(i)];
  }

  // Unnormalized log posterior and its gradient (latent-independent constants
  // dropped). Returns -inf instead of throwing outside the support.
  double logp_grad(const Eigen::VectorXd& q, Eigen::VectorXd& grad) const;
  double log_density(const Eigen::VectorXd& q) const;
  // Multinomial log-likelihood component alone (for model-equivalence tests).
  double likelihood_term(const Eigen::VectorXd& q) const;

  // Choice probabilities of every question at a draw, flattened in dataset
  // order; index cells with cell_offset().
  void fill_probabilities(const Eigen::VectorXd& q,
                          std::vector<double>& flat) const;
  int cell_offset(int set, int question) const {
    return cell_off_[static_cast<std::size_t>(set)][static_cast<std::size_t>(question)];
  }
  int total_cells() const { return total_cells_; }

  // Whether the question carries perturbation latents (false for the plain
  // model and for full-menu questions).
  bool question_perturbed(int set, int question) const {
    return eps_off_[static_cast<std::size_t>(set)]
                   [static_cast<std::size_t>(question)] >= 0;
  }

  double sigma_of(const Eigen::VectorXd& q) const { return std::exp(q[0]); }
  // Perturbation scale (sigma_p or sigma_m); throws for the plain model.
  double perturb_scale_of(const Eigen::VectorXd& q) const;
  // Name of the perturbation scale ("sigma_p"/"sigma_m"), empty if none.
  std::string perturb_scale_name() const;

  // Flat coordinate names ("log_sigma", "z_s[target|item]", ...).
  std::vector<std::string> coordinate_names() const;

 private:
  ModelSpec spec_;
  std::vector<SetLayout> layouts_;
  std::vector<std::string> targets_;
  std::vector<std::vector<std::string>> question_ids_;
  std::vector<int> s_off_;                  // per set: first z_s index
  std::vector<std::vector<int>> eps_off_;   // per set, per question: first z_eps index
  std::vector<std::vector<int>> cell_off_;  // per set, per question: flat cell index
  int dim_ = 0;
  int total_cells_ = 0;
};

struct Diagnostics {
  double rhat_sigma = 1.0;
  double ess_sigma = 0.0;
  double rhat_perturb = 1.0;   // sigma_p / sigma_m (1.0 when absent)
  double ess_perturb = 0.0;
  double rhat_max = 1.0;       // worst split R-hat over all raw coordinates
  int divergences = 0;
  double divergence_fraction = 0.0;
  int max_depth_hits = 0;
  std::vector<ChainStats> chain_stats;
};

struct PosteriorDraws {
  ModelSpec spec;
  std::vector<Eigen::MatrixXd> chains;  // [chain](draw, dim)
  Diagnostics diag;

  long total_draws() const;
};

// Runs the sampler on the model with per-chain derived RNG streams and
// computes diagnostics. Throws SamplerError if any chain diverged on every
// kept draw.
PosteriorDraws sample_posterior(const PosteriorModel& model,
                                const NutsConfig& config);

struct PosteriorSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

// Named scalars: "sigma", "sigma_p", "sigma_m", derived "s[target|item]",
// "eps[question|item]" / "eps[question]", or any raw coordinate name.
std::vector<Eigen::VectorXd> scalar_chains(const PosteriorModel& model,
                                           const PosteriorDraws& draws,
                                           const std::string& name);
PosteriorSummary posterior_summary(const PosteriorModel& model,
                                   const PosteriorDraws& draws,
                                   const std::string& name);
PosteriorSummary summarize_values(std::vector<double> pooled);

// Names exportable as trace scalars: sigma, the perturbation scale, then the
// derived scores (and perturbations when include_latents is set).
std::vector<std::string> trace_scalar_names(const PosteriorModel& model,
                                            bool include_latents);

// Flat trace table: chain, draw, scalar, value.
void export_draws_csv(const PosteriorModel& model, const PosteriorDraws& draws,
                      const std::vector<std::string>& scalars,
                      const std::string& path);

}  // namespace iia

#endif  // IIACHECK_BAYES_HPP
