#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oustab/config.hpp"
#include "oustab/errors.hpp"
#include "oustab/experiment.hpp"
#include "oustab/oracle.hpp"
#include "oustab/report_io.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitContainment = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::string format;
  long trials = -1;
  std::optional<std::uint64_t> seed;
  std::string plot_path;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_experiment_flags) {
  cmd->add_option("--config", args.config_path, "configuration file (JSON)")->required();
  cmd->add_option("--out", args.out_path, "output path (stdout when omitted)");
  cmd->add_option("--format", args.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  if (with_experiment_flags) {
    cmd->add_option("--trials", args.trials, "override the configured trial count");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&args](std::uint64_t v) { args.seed = v; }, "override the base seed");
    cmd->add_option("--plot", args.plot_path, "emit an SVG plot to this path");
    cmd->add_option("--threads", args.threads, "worker threads for trials")
        ->check(CLI::PositiveNumber);
  }
}

oustab::MseReport run_from_config(const CommonArgs& args, oustab::ExperimentConfig& config,
                                  std::string& format, std::string& plot) {
  const json raw = oustab::load_json_file(args.config_path);
  config = oustab::experiment_config_from_json(raw);
  if (args.trials > 0) config.trials = args.trials;
  if (args.seed.has_value()) config.base_seed = *args.seed;
  format = !args.format.empty() ? args.format : config.format;
  plot = !args.plot_path.empty() ? args.plot_path : config.plot_path.value_or("");

  const oustab::ResolvedExperiment resolved = oustab::resolve_experiment(config);
  if (resolved.em_stability_warning) {
    std::cerr << "warning: Euler step " << config.step << " is at or beyond 2/lambda_max(A); "
              << "iterates may diverge\n";
  }
  return oustab::run_experiment(resolved, oustab::config_hash_hex(raw), args.threads);
}

void write_report(const oustab::MseReport& report, const std::string& format,
                  const std::string& out_path) {
  if (out_path.empty()) {
    if (format == "json") oustab::write_report_json(report, std::cout);
    else oustab::write_report_csv(report, std::cout);
    return;
  }
  if (format == "json") oustab::write_report_json(report, std::filesystem::path(out_path));
  else oustab::write_report_csv(report, std::filesystem::path(out_path));
}

int cmd_simulate(const CommonArgs& args) {
  oustab::ExperimentConfig config;
  std::string format, plot;
  const oustab::MseReport report = run_from_config(args, config, format, plot);
  write_report(report, format, args.out_path);
  if (!plot.empty()) oustab::emit_plot(report, plot);
  return kExitOk;
}

int cmd_compare(const CommonArgs& args) {
  oustab::ExperimentConfig config;
  std::string format, plot;
  const oustab::MseReport report = run_from_config(args, config, format, plot);
  if (!args.out_path.empty()) write_report(report, format, args.out_path);
  if (!plot.empty()) oustab::emit_plot(report, plot);

  const auto violations = oustab::check_containment(report);
  long checked = 0;
  for (const auto& row : report.rows) {
    if (row.oracle_exact || row.oracle_upper || row.oracle_lower) ++checked;
  }
  if (violations.empty()) {
    std::cout << "containment OK: " << checked << " bounded rows within 3 SE\n";
    return kExitOk;
  }
  for (const auto& v : violations) {
    std::cout << "containment VIOLATION: " << v.stabilizer << " @ T=" << v.checkpoint_t << ": "
              << v.what << "\n";
  }
  return kExitContainment;
}

int cmd_theory(const CommonArgs& args) {
  const oustab::TheoryConfig config = oustab::load_theory_config(args.config_path);
  const oustab::OuModel model = oustab::build_model(config.model);
  const std::string format = !args.format.empty() ? args.format : "csv";

  struct TheoryRow {
    double horizon;
    double cramer_rao, vanilla, ema_upper, mle;
    std::optional<double> ema_lower, ouema_upper, wrong_a;
  };
  std::vector<TheoryRow> rows;
  for (double t : config.horizons) {
    oustab::RiskQuery q{.model = model,
                        .horizon_t = t,
                        .tau = std::nullopt,
                        .contraction_l = config.contraction_l,
                        .a_tilde = std::nullopt,
                        .c_small_t = config.c_small_t};
    TheoryRow row{};
    row.horizon = t;
    row.cramer_rao = oustab::cramer_rao_lower(q);
    row.vanilla = oustab::vanilla_mse(q);
    row.ema_upper = oustab::ema_mse_upper(q);
    row.ema_lower = oustab::ema_mse_lower(q);
    row.mle = oustab::mle_mse(q);
    if (config.tau.has_value() && *config.tau > 0.0 && *config.tau < t) {
      q.tau = config.tau;
      row.ouema_upper = oustab::ouema_mse_upper(q);
    }
    if (config.a_tilde.has_value()) {
      q.a_tilde = oustab::resolve_a_tilde(*config.a_tilde, model.a());
      row.wrong_a = oustab::wrong_a_mse_upper(q);
    }
    rows.push_back(row);
  }

  auto cell = [](const std::optional<double>& v) {
    return v.has_value() ? oustab::format_double(*v) : std::string();
  };

  std::ostringstream body;
  if (format == "csv") {
    body << "horizon_t,cramer_rao_lower,vanilla_mse,ema_mse_upper,ema_mse_lower,"
            "ouema_mse_upper,mle_mse,wrong_a_mse_upper\n";
    for (const auto& r : rows) {
      body << oustab::format_double(r.horizon) << ',' << oustab::format_double(r.cramer_rao)
           << ',' << oustab::format_double(r.vanilla) << ',' << oustab::format_double(r.ema_upper)
           << ',' << cell(r.ema_lower) << ',' << cell(r.ouema_upper) << ','
           << oustab::format_double(r.mle) << ',' << cell(r.wrong_a) << "\n";
    }
  } else {
    json out = json::array();
    auto jcell = [](const std::optional<double>& v) {
      return v.has_value() ? json(*v) : json(nullptr);
    };
    for (const auto& r : rows) {
      out.push_back({{"horizon_t", r.horizon},
                     {"cramer_rao_lower", r.cramer_rao},
                     {"vanilla_mse", r.vanilla},
                     {"ema_mse_upper", r.ema_upper},
                     {"ema_mse_lower", jcell(r.ema_lower)},
                     {"ouema_mse_upper", jcell(r.ouema_upper)},
                     {"mle_mse", r.mle},
                     {"wrong_a_mse_upper", jcell(r.wrong_a)}});
    }
    body << out.dump(2) << "\n";
  }

  if (args.out_path.empty()) {
    std::cout << body.str();
  } else {
    std::ofstream out(args.out_path, std::ios::trunc);
    if (!out) throw oustab::IoError("cannot open output: " + args.out_path);
    out << body.str();
    if (!out) throw oustab::IoError("failed writing output: " + args.out_path);
  }
  return kExitOk;
}

int cmd_replay(const CommonArgs& args) {
  if (args.out_path.empty()) {
    throw oustab::ValidationError("replay requires --out <prefix> for the output streams");
  }
  const oustab::ReplayConfig config = oustab::load_replay_config(args.config_path);
  const std::filesystem::path config_dir =
      std::filesystem::path(args.config_path).parent_path();
  std::filesystem::path manifest = config.input_manifest;
  if (manifest.is_relative()) manifest = config_dir / manifest;

  const oustab::CheckpointStream input = oustab::read_checkpoint_stream(manifest);
  const auto outputs = oustab::replay_stream(input, config.stabilizers);
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const std::string stem = args.out_path + "." + config.stabilizers[i].name;
    oustab::write_checkpoint_stream(outputs[i], stem + ".manifest", stem + ".bin");
    std::cout << "wrote " << stem << ".manifest (" << outputs[i].count() << " records)\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OU-process trajectory stabilizers: simulation, theory oracles, and replay"};
  app.require_subcommand(1);

  CommonArgs sim_args, cmp_args, thy_args, rep_args;
  CLI::App* sim = app.add_subcommand("simulate", "run a seeded Monte Carlo experiment");
  add_common(sim, sim_args, true);
  CLI::App* cmp = app.add_subcommand(
      "compare", "run an experiment and verify oracle containment (exit 3 on violation)");
  add_common(cmp, cmp_args, true);
  CLI::App* thy = app.add_subcommand("theory", "print the closed-form risk table for a sweep");
  add_common(thy, thy_args, false);
  CLI::App* rep = app.add_subcommand("replay", "apply stabilizers to a saved checkpoint stream");
  add_common(rep, rep_args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_args);
    if (cmp->parsed()) return cmd_compare(cmp_args);
    if (thy->parsed()) return cmd_theory(thy_args);
    if (rep->parsed()) return cmd_replay(rep_args);
  } catch (const oustab::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
