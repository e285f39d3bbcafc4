// Apache License, Version 2.0, refer to LICENSE.txt

#include "iiacheck/experiment.hpp"

#include <cmath>
#include <sstream>

#include "iiacheck/dataset_io.hpp"
#include "iiacheck/rng.hpp"

namespace iia {

void TestOptions::reseed(std::uint64_t seed) {
  RngStream root(seed);
  nuts.seed = root.derive("nuts").next_u64();
  ppc.seed = root.derive("ppc").next_u64();
}

TestReport run_iia_test(const Dataset& data, const TestOptions& opts) {
  if (data.size() == 0) throw ValidationError("dataset has no question sets");
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0))
    throw ValidationError("alpha must lie in (0, 1)");

  TestReport report;
  report.alpha = opts.alpha;
  std::vector<GftResult> testable;
  for (std::size_t i = 0; i < data.size(); ++i) {
    SetTestRow row;
    row.target = data.sets[i].target;
    try {
      const GftResult g = gft(data.sets[i], data.tables[i], opts.mle);
      row.D = g.D;
      row.nu = g.nu;
      row.p_gft = g.p_value;
      testable.push_back(g);
    } catch (const UntestableError& e) {
      row.untestable = true;
      row.note = e.what();
      row.p_gft = -1.0;
    }
    report.per_set.push_back(std::move(row));
  }
  report.testable_sets = static_cast<long>(testable.size());
  if (testable.empty())
    throw ValidationError("no testable question sets in the dataset");
  report.gft_min = aggregate_min(testable, opts.alpha);
  report.gft_sum = aggregate_sum(testable);
  report.gft_sum.reject = report.gft_sum.aggregate_p < opts.alpha;

  if (opts.run_ppc) {
    PosteriorModel model(opts.model, data);
    const PosteriorDraws draws = sample_posterior(model, opts.nuts);
    report.ppc = run_model_ppc(model, draws, opts.ppc);
    report.diag = draws.diag;
    report.sigma_summary = posterior_summary(model, draws, "sigma");
    report.ppc_ran = true;
    for (std::size_t i = 0; i < report.per_set.size(); ++i)
      report.per_set[i].p_ppc = report.ppc.per_set[i].p_value;
  }
  return report;
}

PerturbationFitReport run_perturbation_fit(const Dataset& data, ModelKind kind,
                                           const TestOptions& opts) {
  if (kind == ModelKind::iia)
    throw ValidationError(
        "perturbation fit needs kind additive or multiplicative");
  if (data.size() == 0) throw ValidationError("dataset has no question sets");
  ModelSpec spec = ModelSpec::defaults(kind);
  if (opts.model.kind == kind) spec = opts.model;  // explicit override
  PosteriorModel model(spec, data);
  const PosteriorDraws draws = sample_posterior(model, opts.nuts);

  PerturbationFitReport report;
  report.kind = kind;
  report.diag = draws.diag;
  report.sigma = posterior_summary(model, draws, "sigma");
  report.scale = posterior_summary(model, draws, model.perturb_scale_name());
  report.ratio = report.scale.mean / report.sigma.mean;
  if (opts.run_ppc) {
    report.ppc = run_model_ppc(model, draws, opts.ppc);
    report.ppc_ran = true;
  }
  return report;
}

void SweepOptions::validate() const {
  if (kind == ModelKind::iia)
    throw ValidationError("sweep needs kind additive or multiplicative");
  if (grid.empty()) throw ValidationError("sweep grid is empty");
  for (double v : grid)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValidationError("sweep grid values must be non-negative");
  if (repetitions < 1) throw ValidationError("repetitions must be positive");
  if (alpha_grid.empty()) throw ValidationError("alpha grid is empty");
  for (double a : alpha_grid)
    if (!(a > 0.0 && a < 1.0))
      throw ValidationError("alpha grid values must lie in (0, 1)");
  base.validate();
}

SweepResult run_sweep(const SweepOptions& opts) {
  opts.validate();
  SweepResult result;
  result.opts = opts;
  RngStream root = RngStream(opts.base.seed).derive("sweep");

  for (std::size_t gi = 0; gi < opts.grid.size(); ++gi) {
    for (int rep = 0; rep < opts.repetitions; ++rep) {
      RngStream cs =
          root.derive(static_cast<std::uint64_t>(gi)).derive(static_cast<std::uint64_t>(rep));
      SynthConfig cfg = opts.base;
      cfg.seed = cs.derive("synth").next_u64();
      if (opts.kind == ModelKind::additive) {
        cfg.sigma_p = opts.grid[gi];
        cfg.sigma_m = 0.0;
      } else {
        cfg.sigma_m = opts.grid[gi];
        cfg.sigma_p = 0.0;
      }
      const SynthDataset synth = make_synthetic_dataset(cfg, opts.kind);

      TestOptions t = opts.test;
      t.reseed(cs.derive("analysis").next_u64());
      const TestReport tr = run_iia_test(synth.data, t);

      SweepCell cell;
      cell.value = opts.grid[gi];
      cell.rep = rep;
      cell.gft_min_p = tr.gft_min.aggregate_p;
      cell.gft_sum_p = tr.gft_sum.aggregate_p;
      cell.testable_sets = tr.testable_sets;
      std::vector<double> gft_p;
      for (const SetTestRow& row : tr.per_set)
        if (!row.untestable) gft_p.push_back(row.p_gft);
      cell.gft_rejections = rejection_curve(gft_p, opts.alpha_grid);
      if (tr.ppc_ran) {
        cell.ppc_min_p = tr.ppc.min_p;
        cell.ppc_sum_p = tr.ppc.sum_p;
        std::vector<double> ppc_p;
        for (const PpcSetSummary& s : tr.ppc.per_set) ppc_p.push_back(s.p_value);
        cell.ppc_rejections = rejection_curve(ppc_p, opts.alpha_grid);
      }
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

double SweepResult::mean_at(double value, double SweepCell::* field) const {
  double sum = 0.0;
  long count = 0;
  for (const SweepCell& c : cells) {
    if (c.value == value) {
      sum += c.*field;
      ++count;
    }
  }
  if (count == 0) throw ValidationError("no sweep cells at the given value");
  return sum / static_cast<double>(count);
}

namespace {

std::string param_name(ModelKind kind) {
  return kind == ModelKind::additive ? "sigma_p" : "sigma_m";
}

}  // namespace

std::string fig1_curves_csv(const SweepResult& result) {
  const SweepOptions& opts = result.opts;
  std::ostringstream out;
  out << "model,param,value,method,aggregation,mean_p,repetitions\n";
  struct Row {
    const char* method;
    const char* aggregation;
    double SweepCell::* field;
    bool ppc;
  };
  const Row rows[] = {
      {"gft", "min", &SweepCell::gft_min_p, false},
      {"gft", "sum", &SweepCell::gft_sum_p, false},
      {"ppc", "min", &SweepCell::ppc_min_p, true},
      {"ppc", "sum", &SweepCell::ppc_sum_p, true},
  };
  for (double value : opts.grid) {
    for (const Row& row : rows) {
      if (row.ppc && !opts.test.run_ppc) continue;
      out << to_string(opts.kind) << "," << param_name(opts.kind) << ","
          << format_number(value) << "," << row.method << ","
          << row.aggregation << "," << format_number(result.mean_at(value, row.field))
          << "," << opts.repetitions << "\n";
    }
  }
  return out.str();
}

std::string fig2_rejections_csv(const SweepResult& result) {
  const SweepOptions& opts = result.opts;
  std::ostringstream out;
  out << "model,param,value,alpha,method,mean_rejections,sets\n";
  for (double value : opts.grid) {
    for (std::size_t ai = 0; ai < opts.alpha_grid.size(); ++ai) {
      for (const char* method : {"gft", "ppc"}) {
        const bool is_ppc = std::string(method) == "ppc";
        if (is_ppc && !opts.test.run_ppc) continue;
        double sum = 0.0;
        long count = 0;
        for (const SweepCell& c : result.cells) {
          if (c.value != value) continue;
          const auto& rej = is_ppc ? c.ppc_rejections : c.gft_rejections;
          sum += static_cast<double>(rej[ai]);
          ++count;
        }
        out << to_string(opts.kind) << "," << param_name(opts.kind) << ","
            << format_number(value) << "," << format_number(opts.alpha_grid[ai])
            << "," << method << ","
            << format_number(sum / static_cast<double>(count)) << ","
            << opts.base.m << "\n";
      }
    }
  }
  return out.str();
}

}  // namespace iia
