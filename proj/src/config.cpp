#include "cbf/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cbf/errors.hpp"

namespace cbf {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& key, const std::string& msg) {
    throw ConfigError("config field \"" + key + "\": " + msg);
}

void read(const json& j, const char* key, double& out) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) fail(key, "must be finite");
}

void read(const json& j, const char* key, int& out) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    out = v.get<int>();
}

void read(const json& j, const char* key, std::uint64_t& out) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        fail(key, "expected a non-negative integer");
    out = v.get<std::uint64_t>();
}

void read(const json& j, const char* key, std::vector<double>& out) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_array() || v.empty()) fail(key, "expected a non-empty array of numbers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) fail(std::string(key) + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back(v[i].get<double>());
    }
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "d", "n", "nt", "t_end", "mu", "alpha", "beta", "kappa", "lambda", "delta", "radius", "seed",
        "picard_tol", "max_picard_iters", "tol_vi", "tol_duality", "initial_amplitude", "forcing_amplitude",
        "spectral_width", "perturbation", "max_iters", "opt_tol", "probes", "deltas", "rho_ladder"};
    return keys;
}

void positive(double v, const char* key) {
    if (!(v > 0.0)) fail(key, "must be positive");
}

}  // namespace

ProblemConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& item : j.items())
        if (!known_keys().count(item.key())) fail(item.key(), "unknown key");

    ProblemConfig c;
    read(j, "d", c.d);
    read(j, "n", c.n);
    read(j, "nt", c.nt);
    read(j, "t_end", c.t_end);
    read(j, "mu", c.mu);
    read(j, "alpha", c.alpha);
    read(j, "beta", c.beta);
    read(j, "kappa", c.kappa);
    if (j.contains("kappa")) c.hypothesis.kappa_defaulted = false;
    read(j, "lambda", c.lambda);
    read(j, "delta", c.delta);
    read(j, "radius", c.radius);
    read(j, "seed", c.seed);
    read(j, "picard_tol", c.picard_tol);
    read(j, "max_picard_iters", c.max_picard_iters);
    read(j, "tol_vi", c.tol_vi);
    read(j, "tol_duality", c.tol_duality);
    read(j, "initial_amplitude", c.initial_amplitude);
    read(j, "forcing_amplitude", c.forcing_amplitude);
    read(j, "spectral_width", c.spectral_width);
    read(j, "perturbation", c.perturbation);
    read(j, "max_iters", c.max_iters);
    read(j, "opt_tol", c.opt_tol);
    read(j, "probes", c.probes);
    read(j, "deltas", c.deltas);
    read(j, "rho_ladder", c.rho_ladder);
    validate(c);
    return c;
}

ProblemConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

void validate(ProblemConfig& c) {
    if (c.d != 2 && c.d != 3) fail("d", "must be 2 or 3");
    if (c.n < 4 || c.n % 2 != 0) fail("n", "must be even and >= 4");
    if (c.nt < 1) fail("nt", "must be >= 1");
    positive(c.t_end, "t_end");
    positive(c.mu, "mu");
    if (!(c.alpha >= 1e-12)) fail("alpha", "must be >= 1e-12");
    positive(c.beta, "beta");
    if (c.hypothesis.kappa_defaulted == false && !(c.kappa > 0.0 && c.kappa < 1.0))
        fail("kappa", "must lie in (0, 1)");
    positive(c.lambda, "lambda");
    if (!(c.delta >= 0.0)) fail("delta", "must be >= 0");
    positive(c.radius, "radius");
    positive(c.picard_tol, "picard_tol");
    if (c.max_picard_iters < 1) fail("max_picard_iters", "must be >= 1");
    positive(c.tol_vi, "tol_vi");
    positive(c.tol_duality, "tol_duality");
    if (!(c.initial_amplitude >= 0.0)) fail("initial_amplitude", "must be >= 0");
    if (!(c.forcing_amplitude >= 0.0)) fail("forcing_amplitude", "must be >= 0");
    positive(c.spectral_width, "spectral_width");
    positive(c.perturbation, "perturbation");
    if (c.max_iters < 0) fail("max_iters", "must be >= 0");
    positive(c.opt_tol, "opt_tol");
    if (c.probes < 1) fail("probes", "must be >= 1");
    for (double v : c.deltas)
        if (!(v > 0.0)) fail("deltas", "entries must be positive");
    for (double v : c.rho_ladder)
        if (!(v > 0.0 && v < 1.0)) fail("rho_ladder", "entries must lie in (0, 1)");

    HypothesisReport& h = c.hypothesis;
    const OperatorParams p = c.params();
    if (h.kappa_defaulted) c.kappa = p.kappa_star();
    h.kappa = c.kappa;
    h.two_beta_mu = 2.0 * c.beta * c.mu;
    h.wellposed = h.two_beta_mu >= 1.0;
    h.hypothesis = p.hypothesis_holds(c.kappa);
    h.warnings.clear();
    if (!h.wellposed) h.warnings.push_back("2 beta mu < 1: well-posedness condition fails");
    if (!h.hypothesis) {
        std::ostringstream os;
        os << "2 beta mu = " << h.two_beta_mu << " does not exceed 1/kappa = " << 1.0 / c.kappa
           << "; Lipschitz and adjoint bounds are not covered";
        h.warnings.push_back(os.str());
    }
}

std::string to_json(const ProblemConfig& c) {
    json j{{"d", c.d},
           {"n", c.n},
           {"nt", c.nt},
           {"t_end", c.t_end},
           {"mu", c.mu},
           {"alpha", c.alpha},
           {"beta", c.beta},
           {"kappa", c.kappa},
           {"lambda", c.lambda},
           {"delta", c.delta},
           {"radius", c.radius},
           {"seed", c.seed},
           {"picard_tol", c.picard_tol},
           {"max_picard_iters", c.max_picard_iters},
           {"tol_vi", c.tol_vi},
           {"tol_duality", c.tol_duality},
           {"initial_amplitude", c.initial_amplitude},
           {"forcing_amplitude", c.forcing_amplitude},
           {"spectral_width", c.spectral_width},
           {"perturbation", c.perturbation},
           {"max_iters", c.max_iters},
           {"opt_tol", c.opt_tol},
           {"probes", c.probes},
           {"deltas", c.deltas},
           {"rho_ladder", c.rho_ladder}};
    return j.dump(2);
}

}  // namespace cbf
