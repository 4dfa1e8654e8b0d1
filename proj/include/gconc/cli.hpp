#pragma once

// Command-line front end: check, verify-lemma, bounds and example.
// Exit codes: 0 all checks pass, 1 a check failed or a condition was
// rejected, 2 usage or parse error.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gconc/bounds.hpp"
#include "gconc/conditions.hpp"
#include "gconc/interpolation.hpp"
#include "gconc/report_io.hpp"

namespace gconc {

enum class OutputFormat { Json, Csv, Text };

inline std::string to_string(OutputFormat f) {
  switch (f) {
    case OutputFormat::Json: return "json";
    case OutputFormat::Csv: return "csv";
    case OutputFormat::Text: return "text";
  }
  return "";
}

struct RunConfig {
  std::string command;
  std::string expression;
  int dimension = 1;
  std::uint64_t seed = 42;
  std::uint64_t samples = 1'000'000;
  int quadrature_order = 20;
  std::vector<double> lambda_grid;
  std::vector<double> x_grid;
  OutputFormat output_format = OutputFormat::Json;
  std::optional<double> analytic_K;
  double box_radius = 6.0;
  unsigned workers = 0;
  std::string out;
};

inline const std::vector<double> kDefaultLemmaLambdas{0.0, 0.1, 0.5, 1.0};
inline const std::vector<double> kDefaultMgfLambdas{0.0, 0.25, 0.5, 0.75, 1.0,
                                                    1.25, 1.5, 1.75, 2.0};
inline const std::vector<double> kDefaultXs{0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};

inline EstimatorConfig estimator_config(const RunConfig& rc) {
  EstimatorConfig c;
  c.sampler.seed = rc.seed;
  c.sampler.sample_count = rc.samples;
  c.sampler.workers = rc.workers;
  c.quadrature_order = rc.quadrature_order;
  return c;
}

inline ConditionConfig condition_config(const RunConfig& rc) {
  ConditionConfig c;
  c.seed = rc.seed;
  c.box_radius = rc.box_radius;
  return c;
}

inline BoundsConfig bounds_config(const RunConfig& rc) {
  BoundsConfig c;
  c.estimator = estimator_config(rc);
  c.conditions = condition_config(rc);
  c.analytic_K = rc.analytic_K;
  c.lambdas = rc.lambda_grid;
  return c;
}

inline Json to_json(const RunConfig& rc) {
  Json j;
  j["command"] = rc.command;
  j["expression"] = rc.expression;
  j["dimension"] = rc.dimension;
  j["seed"] = rc.seed;
  j["samples"] = rc.samples;
  j["quadrature_order"] = rc.quadrature_order;
  j["lambdas"] = rc.lambda_grid;
  j["xs"] = rc.x_grid;
  j["format"] = to_string(rc.output_format);
  j["analytic_K"] = detail::optional_number(rc.analytic_K);
  j["box_radius"] = detail::number(rc.box_radius);
  return j;
}

inline Json json_document(const RunConfig& rc, const ConditionReport* conditions,
                          const BoundReport* bounds, const LemmaReport* lemma) {
  Json j;
  j["config"] = to_json(rc);
  j["condition_report"] = conditions ? to_json(*conditions) : Json(nullptr);
  j["bound_report"] = bounds ? to_json(*bounds) : Json(nullptr);
  j["lemma_report"] = lemma ? to_json(*lemma) : Json(nullptr);
  return j;
}

// Lemma rows for each lambda in the grid, gated by condition (i), plus the
// E[T] = Var f row.
inline LemmaReport run_lemma_checks(const FunctionModel& model, std::span<const double> lambdas,
                                    const ConditionIResult& gate, const EstimatorConfig& config) {
  LemmaReport report;
  std::vector<double> admitted;
  for (double l : lambdas) {
    LemmaRow row;
    row.lambda = l;
    if (!gate.admits_lambda(l)) {
      row.skipped = true;
      row.skip_reason = gate.verdict == ConditionIVerdict::Rejected
                            ? "condition (i) rejected"
                            : "exponential integrability not established at this lambda";
    } else {
      admitted.push_back(l);
    }
    report.rows.push_back(row);
  }
  const auto results = verify_lemma_identities(model, admitted, config);
  std::size_t next = 0;
  for (auto& row : report.rows) {
    if (!row.skipped) row.report = results[next++];
  }
  if (gate.derivatives_subexponential) {
    report.mean_t_variance = verify_mean_T_equals_variance(model, config);
  } else {
    report.mean_t_variance_skip_reason = gate.derivative_evidence;
  }
  return report;
}

inline bool bounds_pass(const BoundReport& r) {
  if (r.condition_report.any_rejected()) return false;
  for (const auto& p : r.mgf_curve.points) {
    if (!p.skipped && !p.dominated) return false;
  }
  for (const auto& t : r.tail_table) {
    if (t.violation) return false;
  }
  return true;
}

namespace detail {

inline void check_grid(const std::vector<double>& grid, const char* name) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0) || !std::isfinite(grid[i])) {
      throw CLI::ValidationError(name, "values must be finite and non-negative");
    }
    if (i > 0 && grid[i] < grid[i - 1]) throw CLI::ValidationError(name, "must be sorted ascending");
  }
}

}  // namespace detail

// Runs one command. Reports go to `out` (or --out), diagnostics to `err`.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaussian concentration checks for a function of a standard Gaussian vector",
               "gconc"};
  app.require_subcommand(1);
  RunConfig rc;
  std::string format = "json";

  auto common = [&](CLI::App* sub, bool needs_expr) {
    if (needs_expr) {
      sub->add_option("--expr", rc.expression, "f as an expression in y1..yn")->required();
      sub->add_option("--dim", rc.dimension, "dimension n")
          ->check(CLI::Range(1, kMaxDimension))
          ->capture_default_str();
    }
    sub->add_option("--seed", rc.seed, "random seed")->capture_default_str();
    sub->add_option("--samples", rc.samples, "Monte Carlo samples")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--quad-order", rc.quadrature_order, "Gauss-Hermite order")
        ->check(CLI::Range(2, 64))
        ->capture_default_str();
    sub->add_option("--lambdas", rc.lambda_grid, "lambda grid")->delimiter(',');
    sub->add_option("--xs", rc.x_grid, "tail grid")->delimiter(',');
    sub->add_option("--format", format, "json, csv or text")
        ->check(CLI::IsMember({"json", "csv", "text"}))
        ->capture_default_str();
    sub->add_option("--analytic-K", rc.analytic_K, "exact Lipschitz constant")
        ->check(CLI::PositiveNumber);
    sub->add_option("--box-radius", rc.box_radius, "condition probe box radius")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--workers", rc.workers, "worker threads (0: all cores)")
        ->capture_default_str();
    sub->add_option("--out", rc.out, "output file (default stdout)");
  };
  common(app.add_subcommand("check", "check the hypotheses on f"), true);
  common(app.add_subcommand("verify-lemma", "verify the integration-by-parts identities"), true);
  common(app.add_subcommand("bounds", "classical and variance tail bounds"), true);
  common(app.add_subcommand("example", "built-in one-dimensional sigma example"), false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  rc.command = app.get_subcommands().front()->get_name();
  rc.output_format = format == "csv" ? OutputFormat::Csv
                     : format == "text" ? OutputFormat::Text
                                        : OutputFormat::Json;
  const bool tabular = rc.command == "bounds" || rc.command == "example";
  if (rc.lambda_grid.empty()) rc.lambda_grid = tabular ? kDefaultMgfLambdas : kDefaultLemmaLambdas;
  if (rc.x_grid.empty()) rc.x_grid = kDefaultXs;
  try {
    detail::check_grid(rc.lambda_grid, "--lambdas");
    detail::check_grid(rc.x_grid, "--xs");
    if (rc.output_format == OutputFormat::Csv && !tabular) {
      throw CLI::ValidationError("--format", "csv is only available for bounds and example");
    }
    if (rc.samples < 2) throw CLI::ValidationError("--samples", "needs at least two samples");
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  std::ofstream file;
  if (!rc.out.empty()) {
    file.open(rc.out, std::ios::binary);
    if (!file) {
      err << "error: cannot open " << rc.out << "\n";
      return 2;
    }
  }
  std::ostream& sink = rc.out.empty() ? out : file;

  std::optional<FunctionModel> model;
  if (rc.command == "example") {
    rc.expression = builtin_sigma_example().f_tree.source_text();
  } else {
    try {
      model.emplace(parse_expression(rc.expression, rc.dimension));
    } catch (const ParseError& e) {
      err << "parse error: " << e.what() << "\n";
      return 2;
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
  }

  try {
    if (rc.command == "check") {
      const ConditionReport report = check_conditions(*model, condition_config(rc));
      if (rc.output_format == OutputFormat::Text) {
        write_text(report, sink);
      } else {
        sink << dump_json(json_document(rc, &report, nullptr, nullptr));
      }
      return report.any_rejected() ? 1 : 0;
    }
    if (rc.command == "verify-lemma") {
      const ConditionReport conditions = check_conditions(*model, condition_config(rc));
      const LemmaReport lemma =
          run_lemma_checks(*model, rc.lambda_grid, conditions.condition_i, estimator_config(rc));
      if (rc.output_format == OutputFormat::Text) {
        write_text(lemma, sink);
      } else {
        sink << dump_json(json_document(rc, &conditions, nullptr, &lemma));
      }
      return lemma.all_pass() ? 0 : 1;
    }
    BoundReport report = rc.command == "example"
                             ? sigma_example(builtin_sigma_example(), rc.x_grid, bounds_config(rc))
                             : tail_report(*model, rc.x_grid, bounds_config(rc));
    switch (rc.output_format) {
      case OutputFormat::Csv: write_tail_csv(report, sink); break;
      case OutputFormat::Text: write_text(report, sink); break;
      case OutputFormat::Json:
        sink << dump_json(json_document(rc, &report.condition_report, &report, nullptr));
        break;
    }
    return bounds_pass(report) ? 0 : 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  return run_cli(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace gconc
