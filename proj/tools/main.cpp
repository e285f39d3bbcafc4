// Apache License, Version 2.0, refer to LICENSE.txt
//
// iiacheck: detect and quantify violations of the Independence of Irrelevant
// Alternatives property in similarity-choice datasets.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iiacheck/bayes.hpp"
#include "iiacheck/dataset_io.hpp"
#include "iiacheck/experiment.hpp"
#include "iiacheck/ppc.hpp"
#include "iiacheck/stats.hpp"
#include "iiacheck/synthgen.hpp"
#include "iiacheck/version.hpp"

namespace {

using iia::ValidationError;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitSampler = 3;

std::string default_out_dir() {
  const char* env = std::getenv("IIACHECK_OUT_DIR");
  return (env != nullptr && *env != '\0') ? env : ".";
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

// ---- report serialization ---------------------------------------------------

// Row-oriented mirror of the JSON report: one `field,value` row per scalar
// leaf, identical numeric text in both files.
void flatten_json(const json& node, const std::string& path,
                  std::ostream& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      flatten_json(value, path.empty() ? key : path + "/" + key, out);
    }
  } else if (node.is_array()) {
    std::size_t i = 0;
    for (const auto& value : node) {
      flatten_json(value, path + "/" + std::to_string(i++), out);
    }
  } else {
    out << iia::csv_quote(path) << ",";
    if (node.is_string()) {
      out << iia::csv_quote(node.get<std::string>());
    } else if (node.is_null()) {
      // empty cell
    } else {
      out << node.dump();
    }
    out << "\n";
  }
}

void write_report(const std::string& out_dir, const json& report) {
  iia::write_file_atomic(join_path(out_dir, "report.json"), report.dump(2) + "\n");
  std::ostringstream csv;
  csv << "field,value\n";
  flatten_json(report, "", csv);
  iia::write_file_atomic(join_path(out_dir, "report.csv"), csv.str());
}

json to_json(const iia::PosteriorSummary& s) {
  return json{{"mean", s.mean},
              {"sd", s.sd},
              {"q025", s.q025},
              {"q50", s.q50},
              {"q975", s.q975}};
}

json to_json(const iia::Diagnostics& d) {
  json chains = json::array();
  for (const auto& cs : d.chain_stats) {
    chains.push_back(json{{"step_size", cs.step_size},
                          {"divergences", cs.divergences},
                          {"max_depth_hits", cs.max_depth_hits},
                          {"mean_accept", cs.mean_accept}});
  }
  return json{{"rhat_sigma", d.rhat_sigma},
              {"ess_sigma", d.ess_sigma},
              {"rhat_perturb", d.rhat_perturb},
              {"ess_perturb", d.ess_perturb},
              {"rhat_max", d.rhat_max},
              {"divergences", d.divergences},
              {"divergence_fraction", d.divergence_fraction},
              {"max_depth_hits", d.max_depth_hits},
              {"chains", chains}};
}

json to_json(const iia::AggregateResult& a) {
  json out{{"method", a.method},
           {"aggregate_p", a.aggregate_p},
           {"reject", a.reject}};
  if (a.method == "min_bonferroni") out["corrected_alpha"] = a.corrected_alpha;
  if (a.method == "sum") {
    out["aggregate_D"] = a.aggregate_D;
    out["aggregate_nu"] = a.aggregate_nu;
  }
  return out;
}

json to_json(const iia::PpcReport& p, bool with_per_set) {
  json out{{"draws_used", p.draws_used},
           {"alpha", p.alpha},
           {"sum", json{{"p_value", p.sum_p}, {"reject", p.sum_reject}}},
           {"min",
            json{{"p_value", p.min_p},
                 {"corrected_alpha", p.corrected_alpha},
                 {"reject", p.min_reject}}}};
  if (with_per_set) {
    json sets = json::array();
    for (const auto& s : p.per_set) {
      sets.push_back(json{{"target", s.target},
                          {"p_value", s.p_value},
                          {"t_obs_mean", s.t_obs_mean},
                          {"t_rep_mean", s.t_rep_mean}});
    }
    out["per_set"] = sets;
  }
  return out;
}

json to_json(const iia::TestReport& r) {
  json sets = json::array();
  for (const auto& row : r.per_set) {
    json srow{{"target", row.target}, {"untestable", row.untestable}};
    if (row.untestable) {
      srow["note"] = row.note;
    } else {
      srow["D"] = row.D;
      srow["nu"] = row.nu;
      srow["p_gft"] = row.p_gft;
    }
    if (row.p_ppc >= 0.0) srow["p_ppc"] = row.p_ppc;
    sets.push_back(std::move(srow));
  }
  json out{{"alpha", r.alpha},
           {"testable_sets", r.testable_sets},
           {"per_set", sets},
           {"gft", json{{"min", to_json(r.gft_min)}, {"sum", to_json(r.gft_sum)}}}};
  if (r.ppc_ran) {
    out["ppc"] = to_json(r.ppc, /*with_per_set=*/false);
    out["posterior"] =
        json{{"sigma", to_json(r.sigma_summary)}, {"diagnostics", to_json(r.diag)}};
  }
  return out;
}

// ---- shared flag groups -------------------------------------------------------

struct CommonArgs {
  std::string out_dir = default_out_dir();
  std::uint64_t seed = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--out", args.out_dir,
                  "Output directory (default: $IIACHECK_OUT_DIR or .)");
  cmd->add_option("--seed", args.seed, "Root seed for all randomness")
      ->capture_default_str();
}

struct DatasetArgs {
  std::string questions;
  std::string responses;
};

void add_dataset(CLI::App* cmd, DatasetArgs& args) {
  cmd->add_option("--questions", args.questions, "questions.csv path")
      ->required();
  cmd->add_option("--responses", args.responses, "responses.csv path")
      ->required();
}

void add_sampler(CLI::App* cmd, iia::NutsConfig& nuts) {
  cmd->add_option("--chains", nuts.chains, "MCMC chains")->capture_default_str();
  cmd->add_option("--warmup", nuts.warmup, "Warm-up iterations per chain")
      ->capture_default_str();
  cmd->add_option("--draws", nuts.draws, "Kept draws per chain")
      ->capture_default_str();
  cmd->add_option("--target-accept", nuts.target_accept,
                  "Dual-averaging acceptance target")
      ->capture_default_str();
  cmd->add_option("--max-treedepth", nuts.max_treedepth, "Trajectory depth cap")
      ->capture_default_str();
  cmd->add_option("--threads", nuts.threads,
                  "Worker threads (0 = hardware, capped at chains)")
      ->capture_default_str();
}

json config_echo_base(const std::string& command, const CommonArgs& common) {
  return json{{"command", command},
              {"version", iia::kVersion},
              {"seed", common.seed},
              {"out_dir", common.out_dir}};
}

json sampler_echo(const iia::NutsConfig& nuts) {
  return json{{"chains", nuts.chains},
              {"warmup", nuts.warmup},
              {"draws", nuts.draws},
              {"target_accept", nuts.target_accept},
              {"max_treedepth", nuts.max_treedepth},
              {"threads", nuts.threads}};
}

// ---- synth -------------------------------------------------------------------

struct SynthArgs {
  CommonArgs common;
  std::string model = "iia";
  iia::SynthConfig cfg;
};

void run_synth(const SynthArgs& args) {
  const iia::ModelKind kind = iia::model_kind_from_string(args.model);
  iia::SynthConfig cfg = args.cfg;
  cfg.seed = args.common.seed;
  cfg.validate();
  const iia::SynthDataset synth = iia::make_synthetic_dataset(cfg, kind);

  std::vector<iia::Question> questions;
  std::vector<iia::ResponseRecord> records;
  for (std::size_t i = 0; i < synth.data.size(); ++i) {
    const auto& set = synth.data.sets[i];
    questions.insert(questions.end(), set.questions.begin(), set.questions.end());
    const auto& recs = synth.data.tables[i].records();
    records.insert(records.end(), recs.begin(), recs.end());
  }
  iia::write_questions_csv(join_path(args.common.out_dir, "questions.csv"),
                           questions);
  iia::write_responses_csv(join_path(args.common.out_dir, "responses.csv"),
                           records);

  json truth{{"config", json{{"model", args.model},
                             {"sigma", cfg.sigma},
                             {"sigma_p", cfg.sigma_p},
                             {"sigma_m", cfg.sigma_m},
                             {"m", cfg.m},
                             {"n", cfg.n},
                             {"seed", cfg.seed},
                             {"version", iia::kVersion}}},
             {"universe", synth.universe}};
  json sets = json::array();
  for (std::size_t i = 0; i < synth.data.size(); ++i) {
    const auto& set = synth.data.sets[i];
    const auto& gt = synth.truths[i];
    json scores = json::object();
    for (const auto& [item, s] : gt.scores.scores) scores[item] = s;
    json qs = json::array();
    for (std::size_t qi = 0; qi < set.questions.size(); ++qi) {
      qs.push_back(json{{"id", set.questions[qi].id},
                        {"options", set.questions[qi].choice_set},
                        {"probs", gt.question_probs[qi]}});
    }
    sets.push_back(
        json{{"target", set.target}, {"scores", scores}, {"questions", qs}});
  }
  truth["sets"] = sets;
  iia::write_file_atomic(join_path(args.common.out_dir, "ground_truth.json"),
                         truth.dump(2) + "\n");
  std::cout << "wrote questions.csv, responses.csv, ground_truth.json to "
            << args.common.out_dir << "\n";
}

// ---- ingest-check --------------------------------------------------------------

void run_ingest_check(const DatasetArgs& files, const CommonArgs& common) {
  const iia::Dataset data = iia::load_dataset(files.questions, files.responses);

  long testable = 0;
  json sets = json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    json row{{"target", data.sets[i].target},
             {"questions", data.sets[i].questions.size()},
             {"responses", data.tables[i].total_responses()}};
    try {
      iia::SetLayout lay =
          iia::SetLayout::build(data.sets[i], data.tables[i]);
      lay = lay.without_items(lay.never_chosen());
      row["nu"] = iia::degrees_of_freedom(lay);
      row["testable"] = true;
      ++testable;
    } catch (const iia::UntestableError& e) {
      row["testable"] = false;
      row["note"] = e.what();
    }
    sets.push_back(std::move(row));
  }

  std::set<std::string> participants;
  for (const auto& table : data.tables) {
    for (const auto& rec : table.records()) participants.insert(rec.participant);
  }

  json report{{"config", config_echo_base("ingest-check", common)},
              {"summary", json{{"question_sets", data.size()},
                               {"questions", data.total_questions()},
                               {"responses", data.total_responses()},
                               {"participants", participants.size()},
                               {"aggregate_only", !data.has_records()},
                               {"testable_sets", testable}}},
              {"per_set", sets}};
  write_report(common.out_dir, report);
  std::cout << report["summary"].dump(2) << "\n";
}

// ---- test ----------------------------------------------------------------------

struct TestArgs {
  CommonArgs common;
  DatasetArgs files;
  iia::TestOptions opts;
  long ppc_draws = 0;
  bool no_ppc = false;
};

void run_test(const TestArgs& args) {
  iia::TestOptions opts = args.opts;
  opts.run_ppc = !args.no_ppc;
  opts.ppc.alpha = opts.alpha;
  opts.ppc.max_draws = args.ppc_draws;
  opts.reseed(args.common.seed);

  const iia::Dataset data = iia::load_dataset(args.files.questions,
                                              args.files.responses);
  const iia::TestReport report = iia::run_iia_test(data, opts);

  json out{{"config",
            [&] {
              json c = config_echo_base("test", args.common);
              c["alpha"] = opts.alpha;
              c["run_ppc"] = opts.run_ppc;
              c["ppc_draws"] = args.ppc_draws;
              c["sampler"] = sampler_echo(opts.nuts);
              return c;
            }()},
           {"result", to_json(report)}};
  write_report(args.common.out_dir, out);
  std::cout << "GFT aggregate p: min=" << iia::format_number(report.gft_min.aggregate_p)
            << " sum=" << iia::format_number(report.gft_sum.aggregate_p) << "\n";
  if (report.ppc_ran) {
    std::cout << "PPC aggregate p: min=" << iia::format_number(report.ppc.min_p)
              << " sum=" << iia::format_number(report.ppc.sum_p) << "\n";
  }
}

// ---- sweep ----------------------------------------------------------------------

struct SweepArgs {
  CommonArgs common;
  std::string model = "additive";
  iia::SweepOptions opts;
  long ppc_draws = 0;
  bool no_ppc = false;
};

void run_sweep_cmd(const SweepArgs& args) {
  iia::SweepOptions opts = args.opts;
  opts.kind = iia::model_kind_from_string(args.model);
  opts.base.seed = args.common.seed;
  opts.test.run_ppc = !args.no_ppc;
  opts.test.ppc.max_draws = args.ppc_draws;
  opts.test.ppc.alpha = opts.test.alpha;

  const iia::SweepResult result = iia::run_sweep(opts);
  iia::write_file_atomic(join_path(args.common.out_dir, "fig1_curves.csv"),
                         iia::fig1_curves_csv(result));
  iia::write_file_atomic(join_path(args.common.out_dir, "fig2_rejections.csv"),
                         iia::fig2_rejections_csv(result));

  json cells = json::array();
  for (const auto& c : result.cells) {
    json row{{"value", c.value},
             {"rep", c.rep},
             {"gft_min_p", c.gft_min_p},
             {"gft_sum_p", c.gft_sum_p},
             {"testable_sets", c.testable_sets}};
    if (opts.test.run_ppc) {
      row["ppc_min_p"] = c.ppc_min_p;
      row["ppc_sum_p"] = c.ppc_sum_p;
    }
    cells.push_back(std::move(row));
  }
  json out{{"config",
            [&] {
              json c = config_echo_base("sweep", args.common);
              c["model"] = args.model;
              c["grid"] = opts.grid;
              c["repetitions"] = opts.repetitions;
              c["alpha"] = opts.test.alpha;
              c["alpha_grid"] = opts.alpha_grid;
              c["sigma"] = opts.base.sigma;
              c["m"] = opts.base.m;
              c["n"] = opts.base.n;
              c["run_ppc"] = opts.test.run_ppc;
              c["ppc_draws"] = args.ppc_draws;
              c["sampler"] = sampler_echo(opts.test.nuts);
              return c;
            }()},
           {"cells", cells}};
  write_report(args.common.out_dir, out);
  std::cout << "wrote fig1_curves.csv, fig2_rejections.csv to "
            << args.common.out_dir << "\n";
}

// ---- fit-perturbation -------------------------------------------------------------

struct FitArgs {
  CommonArgs common;
  DatasetArgs files;
  std::string model = "additive";
  iia::TestOptions opts;
  double alpha_sigma = 1.5;
  double beta_sigma = 1.0;
  long ppc_draws = 0;
  bool no_ppc = false;
};

void run_fit(const FitArgs& args) {
  const iia::ModelKind kind = iia::model_kind_from_string(args.model);
  iia::TestOptions opts = args.opts;
  opts.run_ppc = !args.no_ppc;
  opts.ppc.alpha = opts.alpha;
  opts.ppc.max_draws = args.ppc_draws;
  opts.model = iia::ModelSpec::defaults(kind);
  opts.model.alpha_sigma = args.alpha_sigma;
  opts.model.beta_sigma = args.beta_sigma;
  opts.reseed(args.common.seed);

  const iia::Dataset data = iia::load_dataset(args.files.questions,
                                              args.files.responses);
  const iia::PerturbationFitReport report =
      iia::run_perturbation_fit(data, kind, opts);

  json out{{"config",
            [&] {
              json c = config_echo_base("fit-perturbation", args.common);
              c["model"] = args.model;
              c["alpha"] = opts.alpha;
              c["alpha_sigma"] = args.alpha_sigma;
              c["beta_sigma"] = args.beta_sigma;
              c["run_ppc"] = opts.run_ppc;
              c["ppc_draws"] = args.ppc_draws;
              c["sampler"] = sampler_echo(opts.nuts);
              return c;
            }()},
           {"result",
            [&] {
              json r{{"model", iia::to_string(report.kind)},
                     {"sigma", to_json(report.sigma)},
                     {"scale", to_json(report.scale)},
                     {"scale_name", kind == iia::ModelKind::additive
                                        ? "sigma_p"
                                        : "sigma_m"},
                     {"ratio", report.ratio},
                     {"diagnostics", to_json(report.diag)}};
              if (report.ppc_ran) r["ppc"] = to_json(report.ppc, false);
              return r;
            }()}};
  write_report(args.common.out_dir, out);
  std::cout << "posterior mean sigma=" << iia::format_number(report.sigma.mean)
            << " scale=" << iia::format_number(report.scale.mean)
            << " ratio=" << iia::format_number(report.ratio) << "\n";
}

// ---- homogeneity --------------------------------------------------------------------

struct HomogeneityArgs {
  CommonArgs common;
  DatasetArgs files;
  std::string mode = "dirichlet";
  iia::HomogeneityConfig cfg;
  std::vector<std::string> drop;
};

void run_homogeneity(const HomogeneityArgs& args) {
  iia::HomogeneityConfig cfg = args.cfg;
  cfg.mode = iia::homogeneity_mode_from_string(args.mode);
  cfg.seed = args.common.seed;

  const std::vector<iia::Question> questions =
      iia::read_questions_csv(args.files.questions);
  std::vector<iia::ResponseRecord> records =
      iia::read_responses_csv(args.files.responses);
  if (!args.drop.empty()) {
    std::erase_if(records, [&](const iia::ResponseRecord& r) {
      return std::find(args.drop.begin(), args.drop.end(), r.participant) !=
             args.drop.end();
    });
  }
  const iia::Dataset data = iia::build_question_sets(questions, records);
  const iia::HomogeneityResult result = iia::homogeneity_test(data, cfg);

  json participants = json::array();
  for (const auto& p : result.per_participant) {
    participants.push_back(
        json{{"participant", p.participant}, {"information", p.information}});
  }
  json out{{"config",
            [&] {
              json c = config_echo_base("homogeneity", args.common);
              c["mode"] = args.mode;
              c["replicates"] = cfg.replicates;
              c["alpha"] = cfg.alpha;
              c["smoothing_eps"] = cfg.smoothing_eps;
              c["outlier_quantile"] = cfg.outlier_quantile;
              c["dropped_participants"] = args.drop;
              return c;
            }()},
           {"result", json{{"t_obs", result.t_obs},
                           {"p_value", result.p_value},
                           {"reject", result.p_value < cfg.alpha},
                           {"replicates", result.replicates},
                           {"outlier_threshold", result.outlier_threshold},
                           {"outliers", result.outliers}}},
           {"per_participant", participants}};
  write_report(args.common.out_dir, out);
  std::cout << "homogeneity p=" << iia::format_number(result.p_value)
            << " T_obs=" << iia::format_number(result.t_obs) << " outliers="
            << result.outliers.size() << "\n";
}

// ---- export-traces -----------------------------------------------------------------

struct TracesArgs {
  CommonArgs common;
  DatasetArgs files;
  std::string model = "iia";
  iia::NutsConfig nuts;
  bool include_latents = false;
  bool with_ppc = false;
  long ppc_draws = 0;
};

void run_export_traces(const TracesArgs& args) {
  const iia::ModelKind kind = iia::model_kind_from_string(args.model);
  const iia::Dataset data = iia::load_dataset(args.files.questions,
                                              args.files.responses);
  const iia::PosteriorModel model(iia::ModelSpec::defaults(kind), data);
  iia::NutsConfig nuts = args.nuts;
  nuts.seed = iia::RngStream(args.common.seed).derive("nuts").next_u64();
  const iia::PosteriorDraws draws = iia::sample_posterior(model, nuts);

  const std::vector<std::string> scalars =
      iia::trace_scalar_names(model, args.include_latents);
  iia::export_draws_csv(model, draws, scalars,
                        join_path(args.common.out_dir, "traces.csv"));
  std::cout << "wrote traces.csv (" << scalars.size() << " scalars) to "
            << args.common.out_dir << "\n";

  if (args.with_ppc) {
    iia::PpcConfig pc;
    pc.seed = iia::RngStream(args.common.seed).derive("ppc").next_u64();
    pc.max_draws = args.ppc_draws;
    const iia::PpcReport ppc = iia::run_model_ppc(model, draws, pc);
    std::ostringstream out;
    out << "draw,t_obs,t_rep,exceeded\n";
    for (std::size_t i = 0; i < ppc.t_obs_sum.size(); ++i) {
      out << i << "," << iia::format_number(ppc.t_obs_sum[i]) << ","
          << iia::format_number(ppc.t_rep_sum[i]) << ","
          << (ppc.t_rep_sum[i] >= ppc.t_obs_sum[i] ? 1 : 0) << "\n";
    }
    iia::write_file_atomic(join_path(args.common.out_dir, "ppc_traces.csv"),
                           out.str());
    std::cout << "wrote ppc_traces.csv (p=" << iia::format_number(ppc.sum_p)
              << ")\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Detect and quantify violations of the Independence of Irrelevant "
      "Alternatives property in similarity-choice data"};
  app.set_version_flag("--version", std::string(iia::kVersion));
  app.require_subcommand(1);

  // synth
  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "Generate a seeded synthetic dataset with ground truth");
  add_common(synth, synth_args.common);
  synth->add_option("--model", synth_args.model,
                    "Generator: iia, additive, multiplicative")
      ->capture_default_str();
  synth->add_option("--sigma", synth_args.cfg.sigma, "Score scale")
      ->capture_default_str();
  synth->add_option("--sigma-p", synth_args.cfg.sigma_p,
                    "Additive perturbation scale")
      ->capture_default_str();
  synth->add_option("--sigma-m", synth_args.cfg.sigma_m,
                    "Multiplicative perturbation scale")
      ->capture_default_str();
  synth->add_option("--m", synth_args.cfg.m, "Question sets")
      ->capture_default_str();
  synth->add_option("--n", synth_args.cfg.n, "Responses per question")
      ->capture_default_str();

  // ingest-check
  DatasetArgs ingest_files;
  CommonArgs ingest_common;
  CLI::App* ingest = app.add_subcommand(
      "ingest-check", "Validate a dataset and summarize its structure");
  add_common(ingest, ingest_common);
  add_dataset(ingest, ingest_files);

  // test
  TestArgs test_args;
  CLI::App* test = app.add_subcommand(
      "test", "Goodness-of-fit and posterior predictive IIA tests");
  add_common(test, test_args.common);
  add_dataset(test, test_args.files);
  test->add_option("--alpha", test_args.opts.alpha, "Significance level")
      ->capture_default_str();
  test->add_flag("--no-ppc", test_args.no_ppc, "Classical test only");
  test->add_option("--ppc-draws", test_args.ppc_draws,
                   "Cap on posterior draws used by the PPC (0 = all)")
      ->capture_default_str();
  add_sampler(test, test_args.opts.nuts);

  // sweep
  SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Generate-and-test over a perturbation-scale grid");
  add_common(sweep, sweep_args.common);
  sweep->add_option("--model", sweep_args.model,
                    "Perturbation generator: additive or multiplicative")
      ->capture_default_str();
  sweep->add_option("--grid", sweep_args.opts.grid,
                    "Perturbation scale grid values")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--reps", sweep_args.opts.repetitions,
                    "Repetitions per grid value")
      ->capture_default_str();
  sweep->add_option("--sigma", sweep_args.opts.base.sigma, "Score scale")
      ->capture_default_str();
  sweep->add_option("--m", sweep_args.opts.base.m, "Question sets")
      ->capture_default_str();
  sweep->add_option("--n", sweep_args.opts.base.n, "Responses per question")
      ->capture_default_str();
  sweep->add_option("--alpha", sweep_args.opts.test.alpha, "Significance level")
      ->capture_default_str();
  sweep->add_option("--alpha-grid", sweep_args.opts.alpha_grid,
                    "Rejection-curve thresholds")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_flag("--no-ppc", sweep_args.no_ppc, "Classical test only");
  sweep->add_option("--ppc-draws", sweep_args.ppc_draws,
                    "Cap on posterior draws used by the PPC (0 = all)")
      ->capture_default_str();
  add_sampler(sweep, sweep_args.opts.test.nuts);

  // fit-perturbation
  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand(
      "fit-perturbation", "Fit a perturbation model and report its scale");
  add_common(fit, fit_args.common);
  add_dataset(fit, fit_args.files);
  fit->add_option("--model", fit_args.model, "additive or multiplicative")
      ->capture_default_str();
  fit->add_option("--alpha", fit_args.opts.alpha, "Significance level")
      ->capture_default_str();
  fit->add_option("--alpha-sigma", fit_args.alpha_sigma,
                  "Half-normal scale of the score prior")
      ->capture_default_str();
  fit->add_option("--beta-sigma", fit_args.beta_sigma,
                  "Half-normal scale of the perturbation prior")
      ->capture_default_str();
  fit->add_flag("--no-ppc", fit_args.no_ppc, "Skip the fitted model's PPC");
  fit->add_option("--ppc-draws", fit_args.ppc_draws,
                  "Cap on posterior draws used by the PPC (0 = all)")
      ->capture_default_str();
  add_sampler(fit, fit_args.opts.nuts);

  // homogeneity
  HomogeneityArgs hom_args;
  CLI::App* hom = app.add_subcommand(
      "homogeneity", "Population homogeneity test on participant records");
  add_common(hom, hom_args.common);
  add_dataset(hom, hom_args.files);
  hom->add_option("--mode", hom_args.mode, "dirichlet or plugin")
      ->capture_default_str();
  hom->add_option("--replicates", hom_args.cfg.replicates,
                  "Posterior predictive replicates")
      ->capture_default_str();
  hom->add_option("--alpha", hom_args.cfg.alpha, "Significance level")
      ->capture_default_str();
  hom->add_option("--smoothing-eps", hom_args.cfg.smoothing_eps,
                  "Additive smoothing for plug-in proportions")
      ->capture_default_str();
  hom->add_option("--outlier-quantile", hom_args.cfg.outlier_quantile,
                  "Replicate quantile above which participants are flagged")
      ->capture_default_str();
  hom->add_option("--drop-participant", hom_args.drop,
                  "Exclude a participant (repeatable)");

  // export-traces
  TracesArgs traces_args;
  CLI::App* traces = app.add_subcommand(
      "export-traces", "Sample a posterior and export draw traces");
  add_common(traces, traces_args.common);
  add_dataset(traces, traces_args.files);
  traces->add_option("--model", traces_args.model,
                     "iia, additive, or multiplicative")
      ->capture_default_str();
  traces->add_flag("--include-latents", traces_args.include_latents,
                   "Also export per-question perturbation scalars");
  traces->add_flag("--ppc", traces_args.with_ppc,
                   "Also run the PPC and export its traces");
  traces->add_option("--ppc-draws", traces_args.ppc_draws,
                     "Cap on posterior draws used by the PPC (0 = all)")
      ->capture_default_str();
  add_sampler(traces, traces_args.nuts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (synth->parsed()) run_synth(synth_args);
    if (ingest->parsed()) run_ingest_check(ingest_files, ingest_common);
    if (test->parsed()) run_test(test_args);
    if (sweep->parsed()) run_sweep_cmd(sweep_args);
    if (fit->parsed()) run_fit(fit_args);
    if (hom->parsed()) run_homogeneity(hom_args);
    if (traces->parsed()) run_export_traces(traces_args);
  } catch (const iia::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const iia::SamplerError& e) {
    std::cerr << "sampler error: " << e.what() << "\n";
    return kExitSampler;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
