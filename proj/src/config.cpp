#include "oustab/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "oustab/errors.hpp"

namespace oustab {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw ValidationError("config: unknown key '" + item.key() + "' in " + where);
    }
  }
}

double number_or_inf(const json& j, const std::string& where) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "+inf") {
      return std::numeric_limits<double>::infinity();
    }
    throw ValidationError("config: " + where + " must be a number or \"inf\"");
  }
  if (!j.is_number()) throw ValidationError("config: " + where + " must be a number");
  return j.get<double>();
}

std::variant<double, std::vector<double>> vector_spec(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_array()) {
    std::vector<double> out;
    for (const auto& v : j) {
      if (!v.is_number()) throw ValidationError("config: " + where + " entries must be numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }
  throw ValidationError("config: " + where + " must be a number (constant fill) or an array");
}

ModelSpec model_from_json(const json& j) {
  require_keys(j, {"dim", "eigenvalues", "sigma", "eta", "mu_star", "theta0"}, "model");
  ModelSpec spec;
  if (!j.contains("dim")) throw ValidationError("config: model.dim is required");
  spec.dim = j.at("dim").get<Eigen::Index>();
  if (j.contains("eigenvalues")) {
    const json& e = j.at("eigenvalues");
    if (e.is_string()) {
      if (e.get<std::string>() != "identity") {
        throw ValidationError("config: model.eigenvalues must be an array or \"identity\"");
      }
    } else if (e.is_array()) {
      spec.eigenvalues = e.get<std::vector<double>>();
    } else {
      throw ValidationError("config: model.eigenvalues must be an array or \"identity\"");
    }
  }
  if (j.contains("sigma")) spec.sigma = j.at("sigma").get<double>();
  if (j.contains("eta")) spec.eta = j.at("eta").get<double>();
  if (j.contains("mu_star")) spec.mu_star = vector_spec(j.at("mu_star"), "model.mu_star");
  if (j.contains("theta0")) spec.theta0 = vector_spec(j.at("theta0"), "model.theta0");
  return spec;
}

ATildeSpec a_tilde_from_json(const json& j, const std::string& where) {
  ATildeSpec spec;
  if (j.is_string()) {
    if (j.get<std::string>() != "model") {
      throw ValidationError("config: " + where + " string form must be \"model\"");
    }
    spec.kind = ATildeSpec::Kind::Model;
    return spec;
  }
  if (j.is_array()) {
    spec.kind = ATildeSpec::Kind::Eigenvalues;
    spec.eigenvalues = j.get<std::vector<double>>();
    return spec;
  }
  if (j.is_object()) {
    require_keys(j, {"scale", "identity"}, where);
    if (j.contains("scale") == j.contains("identity")) {
      throw ValidationError("config: " + where + " object needs exactly one of scale/identity");
    }
    if (j.contains("scale")) {
      spec.kind = ATildeSpec::Kind::ScaleModel;
      spec.scale = j.at("scale").get<double>();
    } else {
      spec.kind = ATildeSpec::Kind::ScaledIdentity;
      spec.scale = j.at("identity").get<double>();
    }
    return spec;
  }
  throw ValidationError("config: " + where +
                        " must be \"model\", an eigenvalue array, or {scale|identity: s}");
}

StabilizerKind kind_from_string(const std::string& s) {
  if (s == "last_iterate") return StabilizerKind::LastIterate;
  if (s == "flat_average") return StabilizerKind::FlatAverage;
  if (s == "power_ema") return StabilizerKind::PowerEma;
  if (s == "bema") return StabilizerKind::Bema;
  if (s == "ouema") return StabilizerKind::Ouema;
  if (s == "dema") return StabilizerKind::Dema;
  if (s == "mle") return StabilizerKind::Mle;
  throw ValidationError("config: unknown stabilizer kind '" + s + "'");
}

StabilizerSpec stabilizer_from_json(const json& j, std::size_t index) {
  const std::string where = "stabilizers[" + std::to_string(index) + "]";
  require_keys(j,
               {"name", "kind", "kappa", "bias_power", "gamma", "rho", "burn_in", "frequency",
                "time_step", "ouema_debias", "mle_integration", "a_tilde"},
               where);
  if (!j.contains("kind")) throw ValidationError("config: " + where + ".kind is required");
  StabilizerSpec spec;
  spec.kind = kind_from_string(j.at("kind").get<std::string>());
  spec.name = j.contains("name") ? j.at("name").get<std::string>()
                                 : j.at("kind").get<std::string>() + "_" + std::to_string(index);
  if (j.contains("kappa")) spec.config.kappa = j.at("kappa").get<double>();
  if (j.contains("bias_power")) {
    spec.config.bias_power = number_or_inf(j.at("bias_power"), where + ".bias_power");
  }
  if (j.contains("gamma")) spec.config.gamma = j.at("gamma").get<double>();
  if (j.contains("rho")) spec.config.rho = j.at("rho").get<double>();
  if (j.contains("burn_in")) spec.config.burn_in = j.at("burn_in").get<long>();
  if (j.contains("frequency")) spec.config.frequency = j.at("frequency").get<long>();
  if (j.contains("time_step")) {
    spec.config.time_step = j.at("time_step").get<double>();
    spec.time_step_explicit = true;
  }
  if (j.contains("ouema_debias")) {
    const auto s = j.at("ouema_debias").get<std::string>();
    if (s == "power_law") spec.config.ouema_debias = OuemaDebias::PowerLaw;
    else if (s == "continuous_time") spec.config.ouema_debias = OuemaDebias::ContinuousTime;
    else throw ValidationError("config: " + where + ".ouema_debias must be power_law or continuous_time");
  }
  if (j.contains("mle_integration")) {
    const auto s = j.at("mle_integration").get<std::string>();
    if (s == "trapezoid") spec.config.mle_integration = MleIntegration::Trapezoid;
    else if (s == "left_riemann") spec.config.mle_integration = MleIntegration::LeftRiemann;
    else throw ValidationError("config: " + where + ".mle_integration must be trapezoid or left_riemann");
  }
  if (j.contains("a_tilde")) {
    spec.a_tilde = a_tilde_from_json(j.at("a_tilde"), where + ".a_tilde");
  }
  return spec;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const json& j) {
  require_keys(j,
               {"model", "scheme", "step", "horizon", "checkpoints", "stabilizers", "trials",
                "base_seed", "format", "plot", "oracle"},
               "experiment config");
  ExperimentConfig config;
  if (!j.contains("model")) throw ValidationError("config: model is required");
  config.model = model_from_json(j.at("model"));
  if (j.contains("scheme")) {
    const auto s = j.at("scheme").get<std::string>();
    if (s == "exact") config.scheme = Scheme::Exact;
    else if (s == "euler") config.scheme = Scheme::Euler;
    else throw ValidationError("config: scheme must be 'exact' or 'euler'");
  }
  if (j.contains("step")) config.step = j.at("step").get<double>();
  if (!j.contains("horizon")) throw ValidationError("config: horizon is required");
  config.horizon = j.at("horizon").get<double>();
  if (!j.contains("checkpoints")) throw ValidationError("config: checkpoints is required");
  config.checkpoints = j.at("checkpoints").get<std::vector<double>>();
  if (!j.contains("stabilizers")) throw ValidationError("config: stabilizers is required");
  const json& stabs = j.at("stabilizers");
  if (!stabs.is_array()) throw ValidationError("config: stabilizers must be an array");
  for (std::size_t i = 0; i < stabs.size(); ++i) {
    config.stabilizers.push_back(stabilizer_from_json(stabs[i], i));
  }
  if (j.contains("trials")) config.trials = j.at("trials").get<long>();
  if (j.contains("base_seed")) config.base_seed = j.at("base_seed").get<std::uint64_t>();
  if (j.contains("format")) config.format = j.at("format").get<std::string>();
  if (j.contains("plot")) config.plot_path = j.at("plot").get<std::string>();
  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    require_keys(o, {"c_small_t", "contraction_l"}, "oracle");
    if (o.contains("c_small_t")) config.oracle.c_small_t = o.at("c_small_t").get<double>();
    if (o.contains("contraction_l")) {
      config.oracle.contraction_l = o.at("contraction_l").get<double>();
    }
  }
  return config;
}

ReplayConfig replay_config_from_json(const json& j) {
  require_keys(j, {"input_manifest", "stabilizers"}, "replay config");
  ReplayConfig config;
  if (!j.contains("input_manifest")) {
    throw ValidationError("config: input_manifest is required for replay");
  }
  config.input_manifest = j.at("input_manifest").get<std::string>();
  if (!j.contains("stabilizers")) throw ValidationError("config: stabilizers is required");
  const json& stabs = j.at("stabilizers");
  if (!stabs.is_array()) throw ValidationError("config: stabilizers must be an array");
  for (std::size_t i = 0; i < stabs.size(); ++i) {
    config.stabilizers.push_back(stabilizer_from_json(stabs[i], i));
  }
  return config;
}

TheoryConfig theory_config_from_json(const json& j) {
  require_keys(j, {"model", "horizons", "tau", "contraction_l", "c_small_t", "a_tilde"},
               "theory config");
  TheoryConfig config;
  if (!j.contains("model")) throw ValidationError("config: model is required");
  config.model = model_from_json(j.at("model"));
  if (!j.contains("horizons")) throw ValidationError("config: horizons is required");
  config.horizons = j.at("horizons").get<std::vector<double>>();
  if (config.horizons.empty()) throw ValidationError("config: horizons must not be empty");
  if (j.contains("tau")) config.tau = j.at("tau").get<double>();
  if (j.contains("contraction_l")) config.contraction_l = j.at("contraction_l").get<double>();
  if (j.contains("c_small_t")) config.c_small_t = j.at("c_small_t").get<double>();
  if (j.contains("a_tilde")) config.a_tilde = a_tilde_from_json(j.at("a_tilde"), "theory.a_tilde");
  return config;
}

TheoryConfig load_theory_config(const std::filesystem::path& path) {
  return theory_config_from_json(load_json_file(path));
}

std::string canonical_config_dump(const json& j) {
  // nlohmann objects iterate in key order, so dump() is already canonical.
  return j.dump();
}

std::string config_hash_hex(const json& j) {
  const std::string dump = canonical_config_dump(j);
  std::uint64_t hash = 0xcbf29ce484222325ULL;  // FNV-1a 64
  for (unsigned char c : dump) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return j;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return experiment_config_from_json(load_json_file(path));
}

ReplayConfig load_replay_config(const std::filesystem::path& path) {
  return replay_config_from_json(load_json_file(path));
}

}  // namespace oustab
