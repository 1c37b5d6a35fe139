// Command-line front end: fit, simulate, study, select, plotdata.

#include "rtcp/error.hpp"
#include "rtcp/estimation.hpp"
#include "rtcp/io.hpp"
#include "rtcp/posterior.hpp"
#include "rtcp/selection.hpp"
#include "rtcp/simulation.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace rtcp;
using io::json;

namespace {

struct Common {
  std::string output_dir = ".";
  int threads = 1;
  bool deterministic_reduction = true;
  std::string log_level = "info";
};

struct FitFlags {
  std::string input;
  int boundary = 0;
  int points = 201;
  std::string rule = "trapezoid";
  std::uint64_t seed = 1;
  int multistart = 0;
  double threshold = 0.5;
  double alpha_level = 0.05;
  bool raw_seconds = false;
  bool skip_lrt = false;
  int max_iterations = 2000;
  double tolerance = 1e-6;
  double ridge_gamma = 0.01;
  double ridge_psi1 = 0.01;
};

FitOptions fit_options(const FitFlags& f, const Common& common) {
  FitOptions o;
  o.max_iterations = f.max_iterations;
  o.gradient_tolerance = f.tolerance;
  o.ridge_gamma = f.ridge_gamma;
  o.ridge_psi1 = f.ridge_psi1;
  o.quadrature.rule = parse_quadrature_rule(f.rule);
  o.quadrature.points = f.points;
  o.multistart = f.multistart;
  o.seed = f.seed;
  o.eval.threads = common.threads;
  o.eval.deterministic_reduction = common.deterministic_reduction;
  return o;
}

json fit_flags_json(const FitFlags& f, const Common& common) {
  return {{"input", f.input},
          {"c", f.boundary},
          {"K", f.points},
          {"quadrature", f.rule},
          {"seed", f.seed},
          {"multistart", f.multistart},
          {"threshold", f.threshold},
          {"alpha_level", f.alpha_level},
          {"raw_seconds", f.raw_seconds},
          {"lrt", !f.skip_lrt},
          {"max_iterations", f.max_iterations},
          {"tolerance", f.tolerance},
          {"ridge_gamma", f.ridge_gamma},
          {"ridge_psi1", f.ridge_psi1},
          {"threads", common.threads},
          {"deterministic_reduction", common.deterministic_reduction}};
}

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--K", f.points, "Quadrature points")->check(CLI::PositiveNumber);
  cmd->add_option("--quadrature", f.rule, "Quadrature rule: trapezoid or gauss-hermite");
  cmd->add_option("--seed", f.seed, "Seed for jittered multistart");
  cmd->add_option("--multistart", f.multistart, "Extra jittered starts")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--raw-seconds", f.raw_seconds, "Input holds raw times; take logs at ingest");
  cmd->add_option("--max-iterations", f.max_iterations, "Iteration cap per stage")->check(CLI::PositiveNumber);
  cmd->add_option("--tolerance", f.tolerance, "Gradient sup-norm tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--ridge-gamma", f.ridge_gamma, "Stage-1 ridge on gamma")->check(CLI::NonNegativeNumber);
  cmd->add_option("--ridge-psi1", f.ridge_psi1, "Stage-1 ridge on psi1")->check(CLI::NonNegativeNumber);
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--output-dir", c.output_dir, "Directory for result files");
  cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--deterministic-reduction", c.deterministic_reduction,
                  "Thread-count independent summation (true/false)");
  cmd->add_option("--log-level", c.log_level, "trace, debug, info, warn, error");
}

void write_with_header(const fs::path& path, const io::Provenance& p, const std::string& body) {
  io::write_text(path, io::provenance_header(p) + body);
}

int cmd_fit(const FitFlags& flags, const Common& common) {
  if (!(flags.threshold > 0.0 && flags.threshold < 1.0)) throw Error(ErrorKind::config, "--threshold must lie in (0, 1)");
  if (!(flags.alpha_level > 0.0 && flags.alpha_level < 1.0)) {
    throw Error(ErrorKind::config, "--alpha-level must lie in (0, 1)");
  }
  const RtMatrix data = io::read_rt_csv(flags.input, flags.raw_seconds);
  const ModelConfig config(data.n_items(), flags.boundary);
  const FitOptions options = fit_options(flags, common);
  spdlog::info("fitting N={} J={} c={}", data.n_respondents(), data.n_items(), flags.boundary);

  io::FitReport report(fit(data, config, options));
  const auto& f = report.fit;
  if (!f.converged) spdlog::warn("fit stopped before the gradient tolerance: {}", f.status);
  spdlog::info("loglik {:.4f} after {} iterations", f.loglik, f.n_iterations);
  report.wald = wald_gamma_tests(f);
  if (!flags.skip_lrt) {
    for (auto which : {PsiCoordinate::psi1, PsiCoordinate::psi3}) {
      try {
        auto lrt = lrt_psi(data, options, which, f);
        (which == PsiCoordinate::psi1 ? report.lrt_psi1 : report.lrt_psi3) = lrt;
      } catch (const Error& e) {
        spdlog::warn("likelihood-ratio test skipped: {}", e.what());
      }
    }
  }
  report.ci_level = 1.0 - flags.alpha_level;
  report.no_change = no_change_probability_ci(f, report.ci_level);
  report.threshold = flags.threshold;
  report.credible_alpha = flags.alpha_level;
  report.posterior = posterior_table(data, f.theta_hat, build_grid(options.quadrature), config, common.threads);

  const auto prov = io::make_provenance("fit", fit_flags_json(flags, common), flags.seed);
  const fs::path out = common.output_dir;
  io::write_text(out / "fit.json", io::fit_json(report, prov).dump(2) + "\n");
  write_with_header(out / "item_parameters.txt", prov, io::item_table(report));
  write_with_header(out / "structural.txt", prov, io::structural_table(report));
  write_with_header(out / "posterior_summary.txt", prov,
                    io::posterior_summary_table(report) + "\n" + io::modal_distribution_table(report) + "\n" +
                        io::prior_posterior_table(report));
  io::write_text(out / "posterior.csv", io::posterior_csv(report));
  spdlog::info("results written to {}", out.string());
  return 0;
}

struct SimFlags {
  SimCondition condition;
  int replication = 0;
};

int cmd_simulate(const SimFlags& flags, const Common& common) {
  flags.condition.validate();
  const auto sim = simulate_dataset(flags.condition, flags.replication);
  const fs::path out = common.output_dir;
  io::write_matrix_csv(out / "data.csv", sim.data.values());
  json truth = io::truth_json(flags.condition, sim.truth);
  json config = io::condition_json(flags.condition);
  config["replication"] = flags.replication;
  truth["provenance"] = io::to_json(io::make_provenance("simulate", config, flags.condition.seed));
  io::write_text(out / "truth.json", truth.dump(2) + "\n");
  spdlog::info("wrote {}x{} data set to {}", sim.data.n_respondents(), sim.data.n_items(), out.string());
  return 0;
}

struct StudyFlags {
  std::string grid = "primary";
  std::string conditions_file;
  int replications = 50;
  FitFlags fit;  // its seed doubles as the master simulation seed
};

int cmd_study(const StudyFlags& flags, const Common& common) {
  std::vector<SimCondition> conditions;
  if (!flags.conditions_file.empty()) {
    const json spec = io::read_json(flags.conditions_file);
    if (!spec.is_array()) throw Error(ErrorKind::config, "condition file must hold a JSON array");
    for (const auto& item : spec) conditions.push_back(io::condition_from_json(item));
  } else {
    conditions = grid_conditions(parse_grid_kind(flags.grid), flags.replications, flags.fit.seed);
  }
  if (flags.replications < 5) {
    spdlog::warn("{} replication(s) per condition: Monte Carlo error will dominate bias and RMSE", flags.replications);
  }
  FitOptions options = fit_options(flags.fit, common);
  options.standard_errors = false;  // recovery metrics need point estimates only
  options.eval.threads = 1;         // parallelism goes to replications
  StudyOptions study;
  study.threads = common.threads;

  json config = {{"grid", flags.conditions_file.empty() ? flags.grid : "custom"},
                 {"conditions", json::array()},
                 {"fit", fit_flags_json(flags.fit, common)}};
  for (const auto& c : conditions) config["conditions"].push_back(io::condition_json(c));
  const auto prov = io::make_provenance("study", config, flags.fit.seed);

  const fs::path out = common.output_dir;
  std::vector<RecoveryReport> reports;
  json all = json::array();
  for (std::size_t k = 0; k < conditions.size(); ++k) {
    spdlog::info("condition {}/{}: {}", k + 1, conditions.size(), conditions[k].label());
    reports.push_back(run_condition(conditions[k], mle_estimator(options), study));
    const auto stem = fmt::format("condition_{:02d}", k + 1);
    io::write_text(out / (stem + ".csv"), io::recovery_csv(reports.back()));
    all.push_back(io::recovery_json(reports.back()));
  }
  io::write_text(out / "study.json", json{{"provenance", io::to_json(prov)}, {"reports", all}}.dump(2) + "\n");
  write_with_header(out / "structural.txt", prov, io::structural_recovery_table(reports));
  for (const char* block : {"beta", "alpha", "gamma", "sigma"}) {
    write_with_header(out / fmt::format("{}.txt", block), prov, io::item_recovery_table(reports, block));
  }
  std::cout << io::structural_recovery_table(reports);
  return 0;
}

struct SelectFlags {
  std::string candidates = "5,10,15";
  FitFlags fit;
};

std::vector<int> parse_candidates(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::config, fmt::format("cannot read candidate '{}' as an integer", item));
    }
  }
  if (out.empty()) throw Error(ErrorKind::config, "no candidates given");
  return out;
}

int cmd_select(const SelectFlags& flags, const Common& common) {
  const RtMatrix data = io::read_rt_csv(flags.fit.input, flags.fit.raw_seconds);
  FitOptions options = fit_options(flags.fit, common);
  options.standard_errors = false;
  const auto result = select_c(data, parse_candidates(flags.candidates), options);
  json config = fit_flags_json(flags.fit, common);
  config["candidates"] = flags.candidates;
  config.erase("c");
  const auto prov = io::make_provenance("select", config, flags.fit.seed);
  const fs::path out = common.output_dir;
  const std::string table = io::selection_table(result);
  write_with_header(out / "selection.txt", prov, table);
  io::write_text(out / "selection.json", io::selection_json(result, prov).dump(2) + "\n");
  std::cout << table;
  return 0;
}

struct PlotFlags {
  std::string input;
  std::string bundle;
  std::optional<double> threshold;
  bool raw_seconds = false;
};

int cmd_plotdata(const PlotFlags& flags, const Common& common) {
  const json bundle = io::read_json(flags.bundle);
  const auto post = io::load_posterior(bundle);
  const RtMatrix data = io::read_rt_csv(flags.input, flags.raw_seconds);
  const double threshold = flags.threshold.value_or(bundle.value("threshold", 0.5));
  const fs::path out = common.output_dir;
  io::write_text(out / "figure1.csv", io::figure1_csv(data, post, threshold));
  io::write_text(out / "figure2.csv", io::figure2_csv(data, post, threshold));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Change-point model for item response times"};
  app.require_subcommand(1);
  Common common;

  FitFlags fit_flags;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the model to a response-time matrix");
  fit_cmd->add_option("--input", fit_flags.input, "Headerless CSV, respondents x items")->required();
  fit_cmd->add_option("--c", fit_flags.boundary, "Boundary parameter c")->required();
  fit_cmd->add_option("--threshold", fit_flags.threshold, "Classification threshold on P(change)");
  fit_cmd->add_option("--alpha-level", fit_flags.alpha_level, "Credible-set and confidence alpha");
  fit_cmd->add_flag("--no-lrt", fit_flags.skip_lrt, "Skip the likelihood-ratio refits");
  add_fit_flags(fit_cmd, fit_flags);
  add_common(fit_cmd, common);

  SimFlags sim_flags;
  auto* sim_cmd = app.add_subcommand("simulate", "Draw one data set from the model");
  sim_cmd->add_option("--N", sim_flags.condition.n_respondents, "Respondents");
  sim_cmd->add_option("--J", sim_flags.condition.n_items, "Items");
  sim_cmd->add_option("--c", sim_flags.condition.boundary, "Boundary parameter c");
  sim_cmd->add_option("--pi", sim_flags.condition.prevalence, "Change prevalence at xi = 0");
  sim_cmd->add_option("--psi1", sim_flags.condition.psi1, "True psi1");
  sim_cmd->add_option("--psi3", sim_flags.condition.psi3, "True psi3");
  sim_cmd->add_option("--seed", sim_flags.condition.seed, "Master seed");
  sim_cmd->add_option("--replication", sim_flags.replication, "Replication index")->check(CLI::NonNegativeNumber);
  add_common(sim_cmd, common);

  StudyFlags study_flags;
  auto* study_cmd = app.add_subcommand("study", "Run a simulation grid and score parameter recovery");
  study_cmd->add_option("--grid", study_flags.grid, "primary or secondary");
  study_cmd->add_option("--conditions", study_flags.conditions_file, "JSON array of custom conditions");
  study_cmd->add_option("--replications", study_flags.replications, "Replications per condition")
      ->check(CLI::PositiveNumber);
  add_fit_flags(study_cmd, study_flags.fit);
  add_common(study_cmd, common);

  SelectFlags select_flags;
  auto* select_cmd = app.add_subcommand("select", "Choose c by AIC, BIC and ICL");
  select_cmd->add_option("--input", select_flags.fit.input, "Headerless CSV, respondents x items")->required();
  select_cmd->add_option("--candidates", select_flags.candidates, "Comma-separated candidate values of c");
  add_fit_flags(select_cmd, select_flags.fit);
  add_common(select_cmd, common);

  PlotFlags plot_flags;
  auto* plot_cmd = app.add_subcommand("plotdata", "Write plot-ready group means from a fit bundle");
  plot_cmd->add_option("--input", plot_flags.input, "The data the bundle was fitted to")->required();
  plot_cmd->add_option("--bundle", plot_flags.bundle, "fit.json written by the fit command")->required();
  plot_cmd->add_option("--threshold", plot_flags.threshold, "Classification threshold (default: the bundle's)");
  plot_cmd->add_flag("--raw-seconds", plot_flags.raw_seconds, "Input holds raw times");
  add_common(plot_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorKind::config);
  }

  auto logger = spdlog::stderr_color_mt("rtcp");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(common.log_level));

  try {
    if (*fit_cmd) return cmd_fit(fit_flags, common);
    if (*sim_cmd) return cmd_simulate(sim_flags, common);
    if (*study_cmd) return cmd_study(study_flags, common);
    if (*select_cmd) return cmd_select(select_flags, common);
    if (*plot_cmd) return cmd_plotdata(plot_flags, common);
  } catch (const Error& e) {
    spdlog::error("{}: {}", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return 1;
  }
  return 1;
}
