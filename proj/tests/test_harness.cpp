#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "oustab/config.hpp"
#include "oustab/errors.hpp"
#include "oustab/experiment.hpp"
#include "oustab/report_io.hpp"
#include "test_util.hpp"

using namespace oustab;
using nlohmann::json;
using test_util::vec;

namespace {

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "oustab_harness_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

ExperimentConfig small_config() {
  ExperimentConfig config;
  config.model.dim = 2;
  config.model.eigenvalues = std::vector<double>{0.5, 2.0};
  config.model.sigma = 1.0;
  config.model.eta = 0.05;
  config.model.mu_star = 1.0;
  config.model.theta0 = 0.0;
  config.scheme = Scheme::Exact;
  config.step = 0.05;
  config.horizon = 1.0;
  config.checkpoints = {0.25, 1.0};
  config.trials = 40;
  config.base_seed = 4242;

  StabilizerSpec last{.name = "last", .kind = StabilizerKind::LastIterate, .config = {},
                      .a_tilde = std::nullopt, .time_step_explicit = false};
  StabilizerSpec flat{.name = "flat", .kind = StabilizerKind::FlatAverage, .config = {},
                      .a_tilde = std::nullopt, .time_step_explicit = false};
  StabilizerSpec mle{.name = "mle", .kind = StabilizerKind::Mle, .config = {},
                     .a_tilde = ATildeSpec{.kind = ATildeSpec::Kind::Model, .scale = 1.0,
                                           .eigenvalues = {}},
                     .time_step_explicit = false};
  BemaConfig bema_cfg;
  bema_cfg.frequency = 1;
  StabilizerSpec bema{.name = "bema", .kind = StabilizerKind::Bema, .config = bema_cfg,
                      .a_tilde = std::nullopt, .time_step_explicit = false};
  config.stabilizers = {last, flat, mle, bema};
  return config;
}

}  // namespace

TEST_CASE("run_trial is deterministic in (seed, index)") {
  const auto resolved = resolve_experiment(small_config());
  const Eigen::MatrixXd a = run_trial(resolved, 7);
  const Eigen::MatrixXd b = run_trial(resolved, 7);
  CHECK(a == b);  // bitwise
  const Eigen::MatrixXd c = run_trial(resolved, 8);
  CHECK(a != c);
}

TEST_CASE("zero-noise trial from the minimum has zero error") {
  ExperimentConfig config = small_config();
  config.model.theta0 = 1.0;  // theta0 = mu_star
  const auto resolved = resolve_experiment(config);
  const Eigen::MatrixXd errors = run_trial_zero_noise(resolved, 0);
  CHECK(errors.cwiseAbs().maxCoeff() <= 1e-20);
}

TEST_CASE("last-iterate mse over 1e4 scalar trials matches the exact risk") {
  ExperimentConfig config;
  config.model.dim = 1;
  config.model.sigma = 1.0;
  config.model.eta = 0.01;
  config.model.mu_star = 1.0;
  config.model.theta0 = 0.0;
  config.scheme = Scheme::Exact;
  config.step = 0.01;
  config.horizon = 2.0;
  config.checkpoints = {2.0};
  config.trials = 10000;
  config.base_seed = 24601;
  config.stabilizers = {StabilizerSpec{.name = "last",
                                       .kind = StabilizerKind::LastIterate,
                                       .config = {},
                                       .a_tilde = std::nullopt,
                                       .time_step_explicit = false}};
  const MseReport report = run_experiment(config);
  REQUIRE(report.rows.size() == 1);
  const auto& row = report.rows[0];
  REQUIRE(row.oracle_exact.has_value());
  CHECK(std::abs(row.mse - *row.oracle_exact) < 3.0 * row.stderr_);
}

TEST_CASE("trials=1 leaves the standard error undefined") {
  ExperimentConfig config = small_config();
  config.trials = 1;
  const MseReport report = run_experiment(config);
  REQUIRE_FALSE(report.rows.empty());
  for (const auto& row : report.rows) {
    CHECK(row.trials == 1);
    CHECK(std::isnan(row.stderr_));
  }
  // single-trial report mirrors run_trial
  const auto resolved = resolve_experiment(config);
  const Eigen::MatrixXd errors = run_trial(resolved, 0);
  for (const auto& row : report.rows) {
    bool found = false;
    for (std::size_t s = 0; s < resolved.stabilizers.size() && !found; ++s) {
      if (resolved.stabilizers[s].name != row.stabilizer) continue;
      for (std::size_t c = 0; c < resolved.checkpoint_times.size(); ++c) {
        if (resolved.checkpoint_times[c] == row.checkpoint_t) {
          CHECK(row.mse == errors(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)));
          found = true;
          break;
        }
      }
    }
    CHECK(found);
  }
}

TEST_CASE("report does not depend on the thread count") {
  const ExperimentConfig config = small_config();
  const auto resolved = resolve_experiment(config);
  const MseReport one = run_experiment(resolved, "h", 1);
  const MseReport four = run_experiment(resolved, "h", 4);
  REQUIRE(one.rows.size() == four.rows.size());
  for (std::size_t i = 0; i < one.rows.size(); ++i) {
    CHECK(one.rows[i].stabilizer == four.rows[i].stabilizer);
    CHECK(one.rows[i].mse == four.rows[i].mse);        // bitwise
    CHECK(one.rows[i].stderr_ == four.rows[i].stderr_);
  }
}

TEST_CASE("rows are sorted and carry snapped checkpoint times") {
  ExperimentConfig config = small_config();
  config.checkpoints = {1.0, 0.26, 0.26, 0.999};  // snap to 0.25 and 1.0 on the 0.05 grid
  const MseReport report = run_experiment(config);
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const auto& a = report.rows[i - 1];
    const auto& b = report.rows[i];
    CHECK((a.stabilizer < b.stabilizer ||
           (a.stabilizer == b.stabilizer && a.checkpoint_t <= b.checkpoint_t)));
  }
  for (const auto& row : report.rows) {
    CHECK((row.checkpoint_t == 0.25 || row.checkpoint_t == 1.0));
  }
}

TEST_CASE("checkpoints outside the horizon are rejected") {
  ExperimentConfig config = small_config();
  config.checkpoints = {2.0};
  CHECK_THROWS_AS(resolve_experiment(config), ValidationError);
}

TEST_CASE("oracle columns are attached per stabilizer kind") {
  ExperimentConfig config = small_config();
  config.oracle.c_small_t = 0.5;
  config.checkpoints = {0.1, 1.0};  // 0.1 <= c/(2*lambda_max) = 0.125
  const MseReport report = run_experiment(config);
  for (const auto& row : report.rows) {
    if (row.stabilizer == "last") {
      CHECK(row.oracle_exact.has_value());
      CHECK(row.bound_applicability == "exact");
    } else if (row.stabilizer == "flat") {
      CHECK(row.oracle_upper.has_value());
      if (row.checkpoint_t == 0.1) {
        CHECK(row.oracle_lower.has_value());
        CHECK(row.bound_applicability == "upper+lower");
      } else {
        CHECK_FALSE(row.oracle_lower.has_value());
        CHECK(row.bound_applicability == "upper+lower:n/a");
      }
    } else if (row.stabilizer == "mle") {
      CHECK(row.oracle_exact.has_value());
      CHECK(row.oracle_lower.has_value());
      CHECK(row.bound_applicability == "exact+lower");
    } else if (row.stabilizer == "bema") {
      CHECK(row.bound_applicability == "none");
    }
  }
}

TEST_CASE("report CSV round-trips every numeric field exactly") {
  ExperimentConfig config = small_config();
  config.oracle.c_small_t = 0.5;
  const auto resolved = resolve_experiment(config);
  MseReport report = run_experiment(resolved, "abc123", 1);
  const auto path = temp_dir() / "report.csv";
  write_report_csv(report, path);
  const MseReport back = read_report_csv(path);
  CHECK(back.config_hash == report.config_hash);
  CHECK(back.base_seed == report.base_seed);
  CHECK(back.wall_time_seconds == report.wall_time_seconds);
  REQUIRE(back.rows.size() == report.rows.size());
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& a = report.rows[i];
    const auto& b = back.rows[i];
    CHECK(a.stabilizer == b.stabilizer);
    CHECK(a.checkpoint_t == b.checkpoint_t);
    CHECK(a.mse == b.mse);
    CHECK(((std::isnan(a.stderr_) && std::isnan(b.stderr_)) || a.stderr_ == b.stderr_));
    CHECK(a.trials == b.trials);
    CHECK(a.oracle_exact == b.oracle_exact);
    CHECK(a.oracle_upper == b.oracle_upper);
    CHECK(a.oracle_lower == b.oracle_lower);
    CHECK(a.bound_applicability == b.bound_applicability);
  }
}

TEST_CASE("report JSON round-trips") {
  const MseReport report = run_experiment(resolve_experiment(small_config()), "ff00", 1);
  const auto path = temp_dir() / "report.json";
  write_report_json(report, path);
  const MseReport back = read_report_json(path);
  REQUIRE(back.rows.size() == report.rows.size());
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    CHECK(report.rows[i].mse == back.rows[i].mse);
    CHECK(report.rows[i].oracle_upper == back.rows[i].oracle_upper);
  }
}

TEST_CASE("empty report writes a header-only CSV") {
  MseReport report;
  report.config_hash = "deadbeef";
  const auto path = temp_dir() / "empty.csv";
  write_report_csv(report, path);
  const MseReport back = read_report_csv(path);
  CHECK(back.rows.empty());
  CHECK(back.config_hash == "deadbeef");
}

TEST_CASE("emit_plot writes an SVG with one polyline per stabilizer") {
  const MseReport report = run_experiment(resolve_experiment(small_config()), "p", 1);
  const auto path = temp_dir() / "plot.svg";
  emit_plot(report, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("<svg") != std::string::npos);
  CHECK(text.rfind("</svg>") != std::string::npos);
  std::size_t polylines = 0;
  for (std::size_t pos = text.find("<polyline"); pos != std::string::npos;
       pos = text.find("<polyline", pos + 1)) {
    ++polylines;
  }
  CHECK(polylines == 4);  // one per stabilizer
}

TEST_CASE("checkpoint stream round-trip is byte-identical") {
  oustab::RngStream rng(2718);
  CheckpointStream stream;
  stream.dim = 3;
  stream.step_indices = {0, 5, 11, 400};
  stream.records.resize(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) stream.records(i, j) = rng.next_gaussian();

  const auto dir = temp_dir();
  write_checkpoint_stream(stream, dir / "s.manifest", dir / "s.bin");
  const CheckpointStream back = read_checkpoint_stream(dir / "s.manifest");
  CHECK(back.dim == stream.dim);
  CHECK(back.step_indices == stream.step_indices);
  CHECK(back.records == stream.records);  // bitwise through raw doubles

  // re-writing produces byte-identical files
  write_checkpoint_stream(back, dir / "s2.manifest", dir / "s2.bin");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  CHECK(slurp(dir / "s.bin") == slurp(dir / "s2.bin"));
  const std::string m1 = slurp(dir / "s.manifest"), m2 = slurp(dir / "s2.manifest");
  // manifests differ only in the payload filename line
  CHECK(m1.substr(m1.find("dim")) == m2.substr(m2.find("dim")));
}

TEST_CASE("truncated payload raises a format error naming byte counts") {
  oustab::RngStream rng(3141);
  CheckpointStream stream;
  stream.dim = 2;
  stream.step_indices = {0, 1, 2};
  stream.records = Eigen::MatrixXd::Random(3, 2);
  const auto dir = temp_dir();
  write_checkpoint_stream(stream, dir / "t.manifest", dir / "t.bin");
  std::filesystem::resize_file(dir / "t.bin", 40);  // expected 48
  try {
    read_checkpoint_stream(dir / "t.manifest");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("48") != std::string::npos);
    CHECK(msg.find("40") != std::string::npos);
  }
}

TEST_CASE("non-monotone step indices raise a format error") {
  const auto dir = temp_dir();
  std::ofstream bin(dir / "m.bin", std::ios::binary);
  const double zeros[4] = {0, 0, 0, 0};
  bin.write(reinterpret_cast<const char*>(zeros), sizeof(zeros));
  bin.close();
  std::ofstream manifest(dir / "m.manifest");
  manifest << "oustab-checkpoint-stream 1\npayload m.bin\ndim 2\ncount 2\nelem_width 8\n"
              "byte_order little\nrecord 5 0\nrecord 5 16\n";
  manifest.close();
  CHECK_THROWS_AS(read_checkpoint_stream(dir / "m.manifest"), FormatError);
}

TEST_CASE("replay_stream: single record and constant streams") {
  CheckpointStream stream;
  stream.dim = 2;
  stream.step_indices = {0};
  stream.records.resize(1, 2);
  stream.records << 1.5, -2.5;
  std::vector<StabilizerSpec> specs;
  for (auto [name, kind] :
       std::initializer_list<std::pair<const char*, StabilizerKind>>{
           {"last", StabilizerKind::LastIterate},
           {"flat", StabilizerKind::FlatAverage},
           {"bema", StabilizerKind::Bema},
           {"mle", StabilizerKind::Mle}}) {
    StabilizerSpec s;
    s.name = name;
    s.kind = kind;
    s.config.frequency = 1;
    specs.push_back(s);
  }
  const auto outputs = replay_stream(stream, specs);
  REQUIRE(outputs.size() == specs.size());
  for (const auto& out : outputs) {
    CHECK(out.records.row(0) == stream.records.row(0));
  }

  CheckpointStream constant;
  constant.dim = 2;
  constant.step_indices = {0, 3, 9};
  constant.records.resize(3, 2);
  constant.records << 2.0, -1.0, 2.0, -1.0, 2.0, -1.0;
  for (const auto& out : replay_stream(constant, specs)) {
    for (int i = 0; i < 3; ++i) {
      CHECK(out.records(i, 0) == doctest::Approx(2.0).epsilon(1e-14));
      CHECK(out.records(i, 1) == doctest::Approx(-1.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("replay_stream of a dumped trajectory matches in-memory replay bitwise") {
  const OuModel model = OuModel::isotropic(test_util::spd_of({0.5, 2.0}), 1.0, 0.05,
                                           vec({1.0, -1.0}), vec({0.0, 0.0}));
  RngStream rng(515);
  const auto traj = simulate(model, Scheme::Exact, 0.1, 12, rng);

  CheckpointStream stream;
  stream.dim = 2;
  stream.records.resize(static_cast<long>(traj.size()), 2);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    stream.step_indices.push_back(static_cast<long>(i));
    stream.records.row(static_cast<long>(i)) = traj[i].theta.transpose();
  }

  StabilizerSpec bema;
  bema.name = "bema";
  bema.kind = StabilizerKind::Bema;
  bema.config.frequency = 1;
  const auto outputs = replay_stream(stream, {bema});

  std::vector<long> checkpoints;
  for (std::size_t i = 0; i < traj.size(); ++i) checkpoints.push_back(static_cast<long>(i));
  const auto in_memory = replay(StabilizerKind::Bema, bema.config, traj, checkpoints);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    CHECK(outputs[0].records.row(static_cast<long>(i)).transpose() == in_memory[i]);
  }
}

TEST_CASE("config parsing: full document and unknown-key rejection") {
  const json good = {
      {"model",
       {{"dim", 2},
        {"eigenvalues", {0.5, 2.0}},
        {"sigma", 1.0},
        {"eta", 0.05},
        {"mu_star", 1.0},
        {"theta0", {0.0, 0.5}}}},
      {"scheme", "exact"},
      {"step", 0.05},
      {"horizon", 1.0},
      {"checkpoints", {0.5, 1.0}},
      {"stabilizers",
       {{{"kind", "bema"}, {"name", "b"}, {"frequency", 1}, {"bias_power", "inf"}},
        {{"kind", "mle"}, {"a_tilde", "model"}}}},
      {"trials", 3},
      {"base_seed", 99},
      {"format", "json"},
      {"oracle", {{"c_small_t", 0.5}}}};
  const ExperimentConfig config = experiment_config_from_json(good);
  CHECK(config.model.dim == 2);
  CHECK(config.stabilizers.size() == 2);
  CHECK(std::isinf(config.stabilizers[0].config.bias_power));
  CHECK(config.stabilizers[1].name == "mle_1");
  CHECK(config.format == "json");
  CHECK(run_experiment(config).rows.size() == 4);

  json bad = good;
  bad["unexpected"] = 1;
  CHECK_THROWS_AS(experiment_config_from_json(bad), ValidationError);
  json bad_nested = good;
  bad_nested["model"]["extra"] = 2;
  CHECK_THROWS_AS(experiment_config_from_json(bad_nested), ValidationError);
  json bad_stab = good;
  bad_stab["stabilizers"][0]["typo_key"] = 3;
  CHECK_THROWS_AS(experiment_config_from_json(bad_stab), ValidationError);
}

TEST_CASE("config hash is stable under key reordering only") {
  const json a = json::parse(R"({"horizon": 1.0, "model": {"dim": 1}})");
  const json b = json::parse(R"({"model": {"dim": 1}, "horizon": 1.0})");
  CHECK(config_hash_hex(a) == config_hash_hex(b));
  const json c = json::parse(R"({"model": {"dim": 2}, "horizon": 1.0})");
  CHECK(config_hash_hex(a) != config_hash_hex(c));
}

TEST_CASE("experiment validation errors") {
  ExperimentConfig config = small_config();
  config.trials = 0;
  CHECK_THROWS_AS(resolve_experiment(config), ValidationError);
  config = small_config();
  config.stabilizers[1].name = "last";  // duplicate
  CHECK_THROWS_AS(resolve_experiment(config), ValidationError);
  config = small_config();
  config.step = -0.1;
  CHECK_THROWS_AS(resolve_experiment(config), ValidationError);
}

TEST_CASE("containment check flags fabricated violations") {
  MseReport report;
  ReportRow row;
  row.stabilizer = "x";
  row.checkpoint_t = 1.0;
  row.mse = 1.0;
  row.stderr_ = 0.01;
  row.trials = 100;
  row.oracle_upper = 0.5;  // mse - 3se > upper
  report.rows.push_back(row);
  const auto violations = check_containment(report);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].stabilizer == "x");

  report.rows[0].oracle_upper = 1.5;
  CHECK(check_containment(report).empty());
}
