#include "trimer/params.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace trimer {

void ModelParams::validate() const {
  if (!(omega0 > 0.0)) throw std::invalid_argument("omega0 must be > 0");
  if (!(omega_a > 0.0)) throw std::invalid_argument("omega_a must be > 0");
  if (!(g >= 0.0)) throw std::invalid_argument("g must be >= 0");
  if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be >= 0");
  if (n_atoms < 1) throw std::invalid_argument("n_atoms must be >= 1");
  if (!std::isfinite(eta) || !std::isfinite(jbar) || !std::isfinite(phi))
    throw std::invalid_argument("eta, jbar, phi must be finite");
  if (eta < -1.0 || eta > 1.0)
    throw std::invalid_argument("eta must lie in [-1, 1]");
  if (phi < 0.0 || phi > M_PI)
    throw std::invalid_argument("phi must lie in [0, pi]");
}

bool ModelParams::hopping_valid() const { return hopping_violation().empty(); }

std::string ModelParams::hopping_violation() const {
  if (1.0 + 2.0 * jbar * std::cos(phi) <= 0.0)
    return "1 + 2*jbar*cos(phi) <= 0";
  if (1.0 - 2.0 * jbar * std::cos(phi - M_PI / 3.0) <= 0.0)
    return "1 - 2*jbar*cos(phi - pi/3) <= 0";
  return {};
}

ModelParams ModelParams::from_raw(double omega0_raw, double omega_a_raw,
                                  double lambda_raw, double eta, double j_raw,
                                  double phi, double kappa_raw, long n_atoms) {
  if (!(omega0_raw > 0.0)) throw std::invalid_argument("omega0 must be > 0");
  ModelParams p;
  p.omega0 = 1.0;
  p.omega_a = omega_a_raw / omega0_raw;
  p.g = 2.0 * lambda_raw / std::sqrt(omega0_raw * omega_a_raw);
  p.eta = eta;
  p.jbar = j_raw / omega0_raw;
  p.phi = phi;
  p.kappa = kappa_raw / omega0_raw;
  p.n_atoms = n_atoms;
  p.validate();
  return p;
}

namespace {

const char* const known_keys[] = {"omega0", "omega_a", "g",     "eta",
                                  "jbar",   "phi",     "kappa", "n_atoms"};

}  // namespace

ModelParams params_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("parameter file must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : known_keys) known = known || (it.key() == k);
    if (!known) throw std::invalid_argument("unknown parameter key: " + it.key());
  }
  ModelParams p;
  if (j.contains("omega0")) p.omega0 = j["omega0"].get<double>();
  if (j.contains("omega_a")) p.omega_a = j["omega_a"].get<double>();
  if (j.contains("g")) p.g = j["g"].get<double>();
  if (j.contains("eta")) p.eta = j["eta"].get<double>();
  if (j.contains("jbar")) p.jbar = j["jbar"].get<double>();
  if (j.contains("phi")) p.phi = j["phi"].get<double>();
  if (j.contains("kappa")) p.kappa = j["kappa"].get<double>();
  if (j.contains("n_atoms")) p.n_atoms = j["n_atoms"].get<long>();
  p.validate();
  return p;
}

std::string params_to_json(const ModelParams& p) {
  nlohmann::json j;
  j["omega0"] = p.omega0;
  j["omega_a"] = p.omega_a;
  j["g"] = p.g;
  j["eta"] = p.eta;
  j["jbar"] = p.jbar;
  j["phi"] = p.phi;
  j["kappa"] = p.kappa;
  j["n_atoms"] = p.n_atoms;
  return j.dump();
}

ModelParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open parameter file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return params_from_json(ss.str());
}

void save_params(const ModelParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write parameter file: " + path);
  out << params_to_json(p) << "\n";
}

}  // namespace trimer
