// Apache License, Version 2.0, refer to LICENSE.txt

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "iiacheck/bayes.hpp"
#include "iiacheck/dataset_io.hpp"
#include "iiacheck/experiment.hpp"
#include "iiacheck/mle.hpp"
#include "iiacheck/ppc.hpp"
#include "iiacheck/stats.hpp"
#include "iiacheck/synthgen.hpp"
#include "iiacheck/version.hpp"

namespace py = pybind11;

namespace {

std::vector<iia::Question> parse_questions(const py::iterable& questions) {
  std::vector<iia::Question> out;
  for (const auto& item : questions) {
    const py::dict d = item.cast<py::dict>();
    iia::Question q;
    q.id = d["id"].cast<std::string>();
    q.target = d["target"].cast<std::string>();
    q.choice_set = d["options"].cast<std::vector<std::string>>();
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<iia::ResponseRecord> parse_responses(const py::iterable& responses) {
  std::vector<iia::ResponseRecord> out;
  for (const auto& item : responses) {
    const py::sequence s = item.cast<py::sequence>();
    if (s.size() != 3)
      throw iia::ValidationError(
          "each response must be (participant, question_id, selected)");
    out.push_back(iia::ResponseRecord{s[0].cast<std::string>(),
                                      s[1].cast<std::string>(),
                                      s[2].cast<std::string>()});
  }
  return out;
}

iia::Dataset build_dataset(const py::iterable& questions,
                           const py::iterable& responses) {
  return iia::build_question_sets(parse_questions(questions),
                                  parse_responses(responses));
}

py::dict to_dict(const iia::PosteriorSummary& s) {
  py::dict d;
  d["mean"] = s.mean;
  d["sd"] = s.sd;
  d["q025"] = s.q025;
  d["q50"] = s.q50;
  d["q975"] = s.q975;
  return d;
}

py::dict to_dict(const iia::AggregateResult& a) {
  py::dict d;
  d["method"] = a.method;
  d["aggregate_p"] = a.aggregate_p;
  d["reject"] = a.reject;
  if (a.method == "min_bonferroni") d["corrected_alpha"] = a.corrected_alpha;
  if (a.method == "sum") {
    d["aggregate_D"] = a.aggregate_D;
    d["aggregate_nu"] = a.aggregate_nu;
  }
  return d;
}

py::dict to_dict(const iia::Diagnostics& diag) {
  py::dict d;
  d["rhat_sigma"] = diag.rhat_sigma;
  d["ess_sigma"] = diag.ess_sigma;
  d["rhat_perturb"] = diag.rhat_perturb;
  d["ess_perturb"] = diag.ess_perturb;
  d["rhat_max"] = diag.rhat_max;
  d["divergences"] = diag.divergences;
  d["divergence_fraction"] = diag.divergence_fraction;
  return d;
}

py::dict to_dict(const iia::TestReport& r) {
  py::dict d;
  d["alpha"] = r.alpha;
  d["testable_sets"] = r.testable_sets;
  py::list sets;
  for (const auto& row : r.per_set) {
    py::dict srow;
    srow["target"] = row.target;
    srow["untestable"] = row.untestable;
    if (row.untestable) {
      srow["note"] = row.note;
    } else {
      srow["D"] = row.D;
      srow["nu"] = row.nu;
      srow["p_gft"] = row.p_gft;
    }
    if (row.p_ppc >= 0.0) srow["p_ppc"] = row.p_ppc;
    sets.append(srow);
  }
  d["per_set"] = sets;
  py::dict gft;
  gft["min"] = to_dict(r.gft_min);
  gft["sum"] = to_dict(r.gft_sum);
  d["gft"] = gft;
  if (r.ppc_ran) {
    py::dict ppc;
    ppc["draws_used"] = r.ppc.draws_used;
    ppc["min_p"] = r.ppc.min_p;
    ppc["sum_p"] = r.ppc.sum_p;
    ppc["corrected_alpha"] = r.ppc.corrected_alpha;
    ppc["min_reject"] = r.ppc.min_reject;
    ppc["sum_reject"] = r.ppc.sum_reject;
    d["ppc"] = ppc;
    d["sigma"] = to_dict(r.sigma_summary);
    d["diagnostics"] = to_dict(r.diag);
  }
  return d;
}

iia::TestOptions make_options(double alpha, int chains, int warmup, int draws,
                              long ppc_draws, std::uint64_t seed, bool run_ppc) {
  iia::TestOptions opts;
  opts.alpha = alpha;
  opts.nuts.chains = chains;
  opts.nuts.warmup = warmup;
  opts.nuts.draws = draws;
  opts.ppc.alpha = alpha;
  opts.ppc.max_draws = ppc_draws;
  opts.run_ppc = run_ppc;
  opts.reseed(seed);
  return opts;
}

}  // namespace

PYBIND11_MODULE(_iiacheck, m) {
  m.doc() =
      "Statistical tests for violations of the Independence of Irrelevant "
      "Alternatives property in similarity-choice data";
  m.attr("__version__") = iia::kVersion;

  py::register_exception<iia::ValidationError>(m, "ValidationError",
                                               PyExc_ValueError);
  py::register_exception<iia::SamplerError>(m, "SamplerError",
                                            PyExc_RuntimeError);

  m.def("chi2_sf", &iia::chi2_sf, py::arg("x"), py::arg("nu"),
        "Upper-tail probability of the chi-square distribution");
  m.def("chi2_cdf", &iia::chi2_cdf, py::arg("x"), py::arg("nu"));

  m.def(
      "synth",
      [](const std::string& model, double sigma, double sigma_p, double sigma_m,
         int m_sets, int n, std::uint64_t seed) {
        iia::SynthConfig cfg;
        cfg.sigma = sigma;
        cfg.sigma_p = sigma_p;
        cfg.sigma_m = sigma_m;
        cfg.m = m_sets;
        cfg.n = n;
        cfg.seed = seed;
        const iia::SynthDataset synth = iia::make_synthetic_dataset(
            cfg, iia::model_kind_from_string(model));
        py::list questions;
        py::list responses;
        py::dict truth;
        for (std::size_t i = 0; i < synth.data.size(); ++i) {
          for (const auto& q : synth.data.sets[i].questions) {
            py::dict qd;
            qd["id"] = q.id;
            qd["target"] = q.target;
            qd["options"] = q.choice_set;
            questions.append(qd);
          }
          for (const auto& rec : synth.data.tables[i].records()) {
            responses.append(
                py::make_tuple(rec.participant, rec.question_id, rec.selected));
          }
          py::dict scores;
          for (const auto& [item, s] : synth.truths[i].scores.scores)
            scores[py::str(item)] = s;
          truth[py::str(synth.data.sets[i].target)] = scores;
        }
        py::dict out;
        out["questions"] = questions;
        out["responses"] = responses;
        out["truth"] = truth;
        return out;
      },
      py::arg("model") = "iia", py::arg("sigma") = 2.0,
      py::arg("sigma_p") = 0.0, py::arg("sigma_m") = 0.0, py::arg("m") = 100,
      py::arg("n") = 30, py::arg("seed") = 1,
      "Generate a seeded synthetic dataset with ground-truth scores");

  m.def(
      "fit_mle",
      [](const py::iterable& questions, const py::iterable& responses) {
        const iia::Dataset data = build_dataset(questions, responses);
        py::dict out;
        for (std::size_t i = 0; i < data.size(); ++i) {
          const iia::MleResult res = iia::fit_mle(data.sets[i], data.tables[i]);
          py::dict d;
          py::dict scores;
          for (const auto& [item, s] : res.score_vector.scores)
            scores[py::str(item)] = s;
          d["scores"] = scores;
          d["log_likelihood"] = res.final_log_likelihood;
          d["iterations"] = res.iterations;
          d["excluded_items"] = res.excluded_items;
          out[py::str(data.sets[i].target)] = d;
        }
        return out;
      },
      py::arg("questions"), py::arg("responses"),
      "Maximum-likelihood score vectors per question set");

  m.def(
      "gft_test",
      [](const py::iterable& questions, const py::iterable& responses,
         double alpha) {
        const iia::Dataset data = build_dataset(questions, responses);
        iia::TestOptions opts;
        opts.alpha = alpha;
        opts.run_ppc = false;
        return to_dict(iia::run_iia_test(data, opts));
      },
      py::arg("questions"), py::arg("responses"), py::arg("alpha") = 0.05,
      "Classical goodness-of-fit test with both aggregations");

  m.def(
      "run_test",
      [](const py::iterable& questions, const py::iterable& responses,
         double alpha, int chains, int warmup, int draws, long ppc_draws,
         std::uint64_t seed) {
        const iia::Dataset data = build_dataset(questions, responses);
        const iia::TestOptions opts =
            make_options(alpha, chains, warmup, draws, ppc_draws, seed, true);
        return to_dict(iia::run_iia_test(data, opts));
      },
      py::arg("questions"), py::arg("responses"), py::arg("alpha") = 0.05,
      py::arg("chains") = 2, py::arg("warmup") = 300, py::arg("draws") = 300,
      py::arg("ppc_draws") = 0, py::arg("seed") = 1,
      "Goodness-of-fit plus Bayesian posterior predictive check");

  m.def(
      "fit_perturbation",
      [](const py::iterable& questions, const py::iterable& responses,
         const std::string& model, double alpha, int chains, int warmup,
         int draws, long ppc_draws, std::uint64_t seed, bool run_ppc) {
        const iia::Dataset data = build_dataset(questions, responses);
        const iia::TestOptions opts = make_options(alpha, chains, warmup, draws,
                                                   ppc_draws, seed, run_ppc);
        const iia::PerturbationFitReport rep = iia::run_perturbation_fit(
            data, iia::model_kind_from_string(model), opts);
        py::dict d;
        d["model"] = iia::to_string(rep.kind);
        d["sigma"] = to_dict(rep.sigma);
        d["scale"] = to_dict(rep.scale);
        d["ratio"] = rep.ratio;
        d["diagnostics"] = to_dict(rep.diag);
        if (rep.ppc_ran) {
          py::dict ppc;
          ppc["min_p"] = rep.ppc.min_p;
          ppc["sum_p"] = rep.ppc.sum_p;
          ppc["draws_used"] = rep.ppc.draws_used;
          d["ppc"] = ppc;
        }
        return d;
      },
      py::arg("questions"), py::arg("responses"), py::arg("model") = "additive",
      py::arg("alpha") = 0.05, py::arg("chains") = 2, py::arg("warmup") = 300,
      py::arg("draws") = 300, py::arg("ppc_draws") = 0, py::arg("seed") = 1,
      py::arg("run_ppc") = false,
      "Fit a perturbation model; posterior summaries of sigma and its scale");

  m.def(
      "homogeneity",
      [](const py::iterable& questions, const py::iterable& responses,
         const std::string& mode, long replicates, double alpha,
         double smoothing_eps, double outlier_quantile, std::uint64_t seed) {
        const iia::Dataset data = build_dataset(questions, responses);
        iia::HomogeneityConfig cfg;
        cfg.mode = iia::homogeneity_mode_from_string(mode);
        cfg.replicates = replicates;
        cfg.alpha = alpha;
        cfg.smoothing_eps = smoothing_eps;
        cfg.outlier_quantile = outlier_quantile;
        cfg.seed = seed;
        const iia::HomogeneityResult res = iia::homogeneity_test(data, cfg);
        py::dict d;
        d["t_obs"] = res.t_obs;
        d["p_value"] = res.p_value;
        d["reject"] = res.p_value < alpha;
        d["replicates"] = res.replicates;
        d["outlier_threshold"] = res.outlier_threshold;
        d["outliers"] = res.outliers;
        py::dict info;
        for (const auto& p : res.per_participant)
          info[py::str(p.participant)] = p.information;
        d["information"] = info;
        return d;
      },
      py::arg("questions"), py::arg("responses"),
      py::arg("mode") = "dirichlet", py::arg("replicates") = 1000,
      py::arg("alpha") = 0.05, py::arg("smoothing_eps") = 0.0,
      py::arg("outlier_quantile") = 0.99, py::arg("seed") = 1,
      "Population homogeneity test on per-participant records");
}
