// rbfstudy: refinement studies, rate fits and the Gorny campaign.
//
// Exit codes: 0 all checks pass, 1 usage/config/IO error, 2 partial solver
// failures, 3 bound-shape check failed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rbfx/bounds.hpp"
#include "rbfx/serialization.hpp"
#include "rbfx/study.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitSolverFailures = 2;
constexpr int kExitShapeFailed = 3;

nlohmann::json fit_json(const rbfx::SeriesFit& fit, const rbfx::KernelFamily family) {
  nlohmann::json j = {{"alpha", rbfx::detail::alpha_label(fit.alpha)}, {"n_samples", fit.n_samples}};
  if (family == rbfx::KernelFamily::Gaussian && fit.gaussian) {
    j["fit"] = rbfx::to_json(rbfx::make_fit_report(*fit.gaussian, fit.n_samples));
  } else if (fit.mq) {
    j["fit"] = rbfx::to_json(rbfx::make_fit_report(*fit.mq, fit.n_samples));
  }
  if (fit.mq) j["decay_exponent"] = fit.decay_exponent;
  if (!fit.failure.empty()) j["failure"] = fit.failure;
  return j;
}

int run_command(const std::string& config_path, const std::string& out_dir, bool verbose) {
  const rbfx::StudyConfig config = rbfx::load_study_config(config_path);
  rbfx::StudyResult result = rbfx::run_study(config);
  if (verbose) {
    for (const auto& level : result.levels) {
      std::fprintf(stderr, "level %d: d=%.6g N=%d cond=%.3e%s%s\n", level.level, level.d, level.N, level.cond_estimate,
                   level.solved ? "" : " FAILED: ", level.failure.c_str());
    }
  }

  const auto family = config.kernel.family();
  const rbfx::SeriesFit& e0 = result.e0_fit();
  bool shape_ok = e0.mq.has_value() && e0.mq->lambda_hat < 1;
  if (family == rbfx::KernelFamily::Gaussian) shape_ok = shape_ok && e0.gaussian.has_value();

  nlohmann::json summary;
  if (family == rbfx::KernelFamily::Gaussian && e0.gaussian) {
    summary = rbfx::to_json(rbfx::make_fit_report(*e0.gaussian, e0.n_samples));
  } else if (e0.mq) {
    summary = rbfx::to_json(rbfx::make_fit_report(*e0.mq, e0.n_samples));
  } else {
    summary = {{"model", family == rbfx::KernelFamily::Gaussian ? "gaussian" : "mq"},
               {"params", nlohmann::json::object()},
               {"r2", nullptr},
               {"n_samples", e0.n_samples},
               {"regime_counts", nlohmann::json::object()},
               {"failure", e0.failure}};
  }

  if (!config.alphas.empty()) {
    try {
      const rbfx::BoundCheckReport report = rbfx::check_bounds(result);
      rbfx::annotate_regimes(result, report);
      nlohmann::json counts = nlohmann::json::object();
      for (const auto& [name, n] : report.regime_counts) counts[name] = n;
      summary["regime_counts"] = counts;
      auto checks = nlohmann::json::array();
      for (const auto& c : report.alphas) {
        checks.push_back({{"alpha", rbfx::detail::alpha_label(c.alpha)},
                          {"C_alpha", c.C_alpha},
                          {"checked", c.checked},
                          {"passes", c.passes},
                          {"pass_fraction", c.pass_fraction},
                          {"passed", c.passed}});
      }
      summary["bound_check"] = checks;
      shape_ok = shape_ok && report.passed;
    } catch (const rbfx::Error& e) {
      summary["bound_check_failure"] = e.what();
      shape_ok = false;
    }
    auto rates = nlohmann::json::array();
    for (const auto& c : rbfx::check_rates(result)) {
      rates.push_back({{"alpha", rbfx::detail::alpha_label(c.alpha)},
                       {"ratio", std::isfinite(c.ratio) ? nlohmann::json(c.ratio) : nlohmann::json(nullptr)},
                       {"required", c.required},
                       {"passed", c.passed}});
      shape_ok = shape_ok && c.passed;
    }
    summary["rate_checks"] = rates;
  }
  auto series = nlohmann::json::array();
  for (const auto& fit : result.fits) series.push_back(fit_json(fit, family));
  summary["series"] = series;
  summary["study"] = config.name;
  summary["solver_failures"] = result.solver_failures();

  int code = kExitOk;
  if (!shape_ok) {
    code = kExitShapeFailed;
  } else if (result.solver_failures() > 0) {
    code = kExitSolverFailures;
  }
  summary["exit_code"] = code;

  std::filesystem::create_directories(out_dir);
  const auto rows_path = std::filesystem::path(out_dir) / config.rows_file;
  const auto summary_path = std::filesystem::path(out_dir) / config.summary_file;
  std::ofstream(rows_path, std::ios::binary) << rbfx::rows_to_csv(result);
  std::ofstream(summary_path, std::ios::binary) << summary.dump(2) << "\n";
  if (verbose) std::fprintf(stderr, "wrote %s and %s\n", rows_path.c_str(), summary_path.c_str());
  return code;
}

int fit_command(const std::string& rows_path, const std::string& model, const std::string& alpha) {
  std::ifstream in(rows_path, std::ios::binary);
  if (!in) throw rbfx::Error(rbfx::ErrorCode::InvalidArgument, "cannot open rows file '" + rows_path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto report = rbfx::fit_rows(rbfx::rows_from_csv(buffer.str()), model, alpha);
  std::cout << rbfx::to_json(report).dump(2) << "\n";
  return kExitOk;
}

int gorny_command(int trials, std::uint64_t seed, bool verbose) {
  const auto campaign = rbfx::run_gorny_campaign(trials, seed);
  nlohmann::json j = {{"trials", campaign.trials}, {"violations", campaign.violations}, {"worst_ratio", campaign.worst_ratio}};
  if (verbose) {
    auto failures = nlohmann::json::array();
    for (const auto& f : campaign.failures) {
      failures.push_back({{"family", f.family}, {"k", f.k}, {"l", f.l}, {"delta", f.delta}, {"lhs", f.report.lhs}, {"rhs", f.report.rhs}});
    }
    j["failures"] = failures;
  }
  std::cout << j.dump(2) << "\n";
  return campaign.violations == 0 ? kExitOk : kExitShapeFailed;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"RBF interpolation refinement studies"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Report condition estimates and progress on stderr");

  std::string config_path, out_dir;
  auto* run = app.add_subcommand("run", "Run a refinement study");
  run->add_option("--config", config_path, "Study config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory")->required();

  std::string rows_path, model, alpha = "0";
  auto* fit = app.add_subcommand("fit", "Fit a decay rate to a rows CSV");
  fit->add_option("--rows", rows_path, "Rows CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--model", model, "Rate model")->required()->check(CLI::IsMember({"mq", "gaussian"}));
  fit->add_option("--alpha", alpha, "Series to fit (dash-joined multi-index, 0 for E0)");

  int trials = 1000;
  std::uint64_t seed = 1;
  auto* gorny = app.add_subcommand("gorny", "Run the Gorny-inequality campaign");
  gorny->add_option("--trials", trials, "Number of random cases")->check(CLI::NonNegativeNumber);
  gorny->add_option("--seed", seed, "Random seed");

  for (auto* sub : {run, fit, gorny}) sub->add_flag("-v,--verbose", verbose, "Report condition estimates and progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }
  try {
    if (*run) return run_command(config_path, out_dir, verbose);
    if (*fit) return fit_command(rows_path, model, alpha);
    return gorny_command(trials, seed, verbose);
  } catch (const rbfx::Error& e) {
    std::fprintf(stderr, "rbfstudy: %s\n", e.what());
    return kExitError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rbfstudy: %s\n", e.what());
    return kExitError;
  }
}
