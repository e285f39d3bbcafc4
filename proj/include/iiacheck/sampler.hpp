// Apache License, Version 2.0, refer to LICENSE.txt
//
// Dynamic Hamiltonian Monte Carlo with multinomial trajectory sampling and
// no-U-turn termination, dual-averaging step-size adaptation, and diagonal
// mass-matrix estimation over expanding warm-up windows. Generic over any
// differentiable unnormalized log density.

#ifndef IIACHECK_SAMPLER_HPP
#define IIACHECK_SAMPLER_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "iiacheck/core.hpp"
#include "iiacheck/rng.hpp"

namespace iia {

// Returns the unnormalized log density at q and fills grad with its gradient.
// Must return -inf (not throw) outside the support.
using LogDensityGradient =
    std::function<double(const Eigen::VectorXd& q, Eigen::VectorXd& grad)>;

struct NutsConfig {
  int chains = 4;
  int warmup = 2000;
  int draws = 2000;            // kept draws per chain
  double target_accept = 0.8;  // dual-averaging target
  int max_treedepth = 10;
  double max_energy_error = 1000.0;  // divergence threshold
  double init_radius = 1.0;          // initial positions uniform(-r, r)
  double init_step_size = 1.0;
  uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency, capped at `chains`

  void validate() const;
};

struct ChainStats {
  double step_size = 0.0;
  int divergences = 0;      // sampling phase only
  int max_depth_hits = 0;   // trajectories stopped by the depth cap
  double mean_accept = 0.0;
};

struct NutsResult {
  std::vector<Eigen::MatrixXd> chains;  // [chain](draw, dim)
  std::vector<ChainStats> stats;

  int total_divergences() const;
  long total_draws() const;
  double divergence_fraction() const;
};

NutsResult nuts_sample(int dim, const LogDensityGradient& target,
                       const NutsConfig& config, RngStream root);

// Split R-hat over one scalar's chains (each entry: one chain's draws).
double split_rhat(const std::vector<Eigen::VectorXd>& chains);

// Effective sample size via Geyer's initial monotone sequence on split chains.
double effective_sample_size(const std::vector<Eigen::VectorXd>& chains);

}  // namespace iia

#endif  // IIACHECK_SAMPLER_HPP
