// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef IIACHECK_EXPERIMENT_HPP
#define IIACHECK_EXPERIMENT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "iiacheck/bayes.hpp"
#include "iiacheck/core.hpp"
#include "iiacheck/mle.hpp"
#include "iiacheck/ppc.hpp"
#include "iiacheck/sampler.hpp"
#include "iiacheck/stats.hpp"
#include "iiacheck/synthgen.hpp"

namespace iia {

// One full analysis of a dataset: classical goodness-of-fit per question set
// with both aggregations, optionally followed by a Bayesian fit of the plain
// model and its posterior predictive check.

struct TestOptions {
  double alpha = 0.05;
  MleConfig mle;
  NutsConfig nuts;
  PpcConfig ppc;
  bool run_ppc = true;
  ModelSpec model = ModelSpec::defaults(ModelKind::iia);

  // Seeds the sampler and the replicator from one root.
  void reseed(std::uint64_t seed);
};

struct SetTestRow {
  std::string target;
  double D = 0.0;
  int nu = 0;
  double p_gft = 1.0;
  bool untestable = false;
  std::string note;        // reason when untestable
  double p_ppc = -1.0;     // per-set PPC p-value; -1 when PPC did not run
};

struct TestReport {
  std::vector<SetTestRow> per_set;
  long testable_sets = 0;
  AggregateResult gft_min;  // over testable sets
  AggregateResult gft_sum;
  bool ppc_ran = false;
  PpcReport ppc;
  Diagnostics diag;                // posterior diagnostics when PPC ran
  PosteriorSummary sigma_summary;  // idem
  double alpha = 0.05;
};

TestReport run_iia_test(const Dataset& data, const TestOptions& opts);

// Perturbation-model fit: posterior summaries of sigma and the perturbation
// scale, their ratio, and the fitted model's own PPC.
struct PerturbationFitReport {
  ModelKind kind = ModelKind::additive;
  PosteriorSummary sigma;
  PosteriorSummary scale;  // sigma_p or sigma_m
  double ratio = 0.0;      // mean(scale) / mean(sigma)
  bool ppc_ran = false;
  PpcReport ppc;
  Diagnostics diag;
};

PerturbationFitReport run_perturbation_fit(const Dataset& data,
                                           ModelKind kind,
                                           const TestOptions& opts);

// Simulation sweep over a perturbation-scale grid: for each grid value and
// repetition, generate a dataset and analyze it; collect the decay-curve and
// rejection-curve data.

struct SweepOptions {
  ModelKind kind = ModelKind::additive;  // generator for nonzero grid values
  std::vector<double> grid = {0.0, 0.2, 0.4, 0.6, 0.8};
  int repetitions = 10;
  SynthConfig base;                      // sigma, m, n, seed
  std::vector<double> alpha_grid = {0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  TestOptions test;

  void validate() const;
};

struct SweepCell {
  double value = 0.0;  // grid point (sigma_p or sigma_m)
  int rep = 0;
  double gft_min_p = 1.0;  // raw minimum per-set p
  double gft_sum_p = 1.0;
  double ppc_min_p = 1.0;
  double ppc_sum_p = 1.0;
  long testable_sets = 0;
  // Per alpha-grid entry: number of per-set p-values below it.
  std::vector<int> gft_rejections;
  std::vector<int> ppc_rejections;
};

struct SweepResult {
  SweepOptions opts;
  std::vector<SweepCell> cells;

  // Mean over repetitions of the given field at one grid value.
  double mean_at(double value, double SweepCell::* field) const;
};

SweepResult run_sweep(const SweepOptions& opts);

// Curve tables as CSV text (written by the CLI; exposed for byte-identity
// tests). fig1: mean p-value decay per method and aggregation; fig2: mean
// per-set rejection counts over the alpha grid.
std::string fig1_curves_csv(const SweepResult& result);
std::string fig2_rejections_csv(const SweepResult& result);

}  // namespace iia

#endif  // IIACHECK_EXPERIMENT_HPP
