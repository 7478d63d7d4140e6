#include "dpw/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace dpw {

namespace {

using nlohmann::json;

void rejectUnknown(const json& j, const std::string& where,
                   std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw Error(where + ": unknown key \"" + it.key() + "\"");
    }
}

double asNumber(const json& j, const std::string& where) {
    if (!j.is_number()) throw Error(where + ": expected a number");
    return j.get<double>();
}

int asInt(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw Error(where + ": expected an integer");
    return j.get<int>();
}

cplx asComplex(const json& j, const std::string& where) {
    if (j.is_number()) return cplx(j.get<double>(), 0.0);
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return cplx(j[0].get<double>(), j[1].get<double>());
    throw Error(where + ": expected a number or a [re, im] pair");
}

std::vector<double> asLadder(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw Error(where + ": expected a non-empty array");
    std::vector<double> v;
    v.reserve(j.size());
    for (const auto& e : j) v.push_back(asNumber(e, where));
    return v;
}

void checkWeight(double t, const std::string& where) {
    if (!(t <= 1.0 / 16.0))
        throw Error(where + ": weight t = " + std::to_string(t) +
                    " exceeds the cylinder bound 1/16 (r, s would leave the real line)");
}

FamilyConfig parseFamily(const json& j, const std::string& where) {
    rejectUnknown(j, where, {"branch", "coupling", "kappa", "nu", "epsilon"});
    FamilyConfig f;
    if (j.contains("branch")) {
        const auto b = j.at("branch");
        if (!b.is_string()) throw Error(where + ".branch: expected a string");
        const std::string s = b.get<std::string>();
        if (s == "spherical")
            f.branch = Branch::spherical;
        else if (s == "catenoidal")
            f.branch = Branch::catenoidal;
        else
            throw Error(where + ".branch: expected \"spherical\" or \"catenoidal\"");
    }
    if (j.contains("coupling")) f.coupling = asComplex(j.at("coupling"), where + ".coupling");
    if (j.contains("kappa")) f.kappa = asNumber(j.at("kappa"), where + ".kappa");
    if (j.contains("nu")) f.nu = asComplex(j.at("nu"), where + ".nu");
    if (j.contains("epsilon")) {
        f.epsilon = asNumber(j.at("epsilon"), where + ".epsilon");
        if (!(f.epsilon > 0.0)) throw Error(where + ".epsilon: must be positive");
    }
    return f;
}

}  // namespace

ExperimentConfig parseConfig(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(origin + ": " + e.what());
    }
    if (!j.is_object()) throw Error(origin + ": top level must be an object");
    rejectUnknown(j, origin,
                  {"command", "t", "family", "grid", "tolerances", "ladders", "mode", "mesh",
                   "embedding", "prefix"});

    ExperimentConfig c;
    if (!j.contains("command") || !j.at("command").is_string())
        throw Error(origin + ": missing string key \"command\"");
    c.command = j.at("command").get<std::string>();
    static const char* commands[] = {"delaunay", "perturbed", "convergence", "embeddedness",
                                     "monodromy"};
    if (std::none_of(std::begin(commands), std::end(commands),
                     [&](const char* s) { return c.command == s; }))
        throw Error(origin + ": unknown command \"" + c.command + "\"");

    if (j.contains("t")) {
        c.t = asNumber(j.at("t"), origin + ".t");
        checkWeight(c.t, origin + ".t");
    }
    if (j.contains("family")) c.family = parseFamily(j.at("family"), origin + ".family");

    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        rejectUnknown(g, origin + ".grid", {"L", "N", "annulus_R"});
        if (g.contains("L")) c.pipeline.grid.L = asInt(g.at("L"), origin + ".grid.L");
        if (g.contains("N")) c.pipeline.grid.N = asInt(g.at("N"), origin + ".grid.N");
        if (g.contains("annulus_R"))
            c.pipeline.grid.annulus_R = asNumber(g.at("annulus_R"), origin + ".grid.annulus_R");
        try {
            c.pipeline.grid.validate();
        } catch (const Error& e) {
            throw Error(origin + ".grid: " + e.what());
        }
    }

    if (j.contains("tolerances")) {
        const auto& tl = j.at("tolerances");
        rejectUnknown(tl, origin + ".tolerances",
                      {"ode_tol", "factor_tol", "decomposition_tol", "reg_tol", "zap_K"});
        if (tl.contains("ode_tol"))
            c.pipeline.ode.ode_tol = asNumber(tl.at("ode_tol"), origin + ".tolerances.ode_tol");
        if (tl.contains("factor_tol"))
            c.pipeline.iwasawa.factor_tol =
                asNumber(tl.at("factor_tol"), origin + ".tolerances.factor_tol");
        if (tl.contains("decomposition_tol"))
            c.pipeline.iwasawa.decomposition_tol =
                asNumber(tl.at("decomposition_tol"), origin + ".tolerances.decomposition_tol");
        if (tl.contains("reg_tol"))
            c.pipeline.reg_tol = asNumber(tl.at("reg_tol"), origin + ".tolerances.reg_tol");
        if (tl.contains("zap_K"))
            c.pipeline.zap_K = asInt(tl.at("zap_K"), origin + ".tolerances.zap_K");
    }

    if (j.contains("ladders")) {
        const auto& l = j.at("ladders");
        rejectUnknown(l, origin + ".ladders", {"t", "z"});
        if (l.contains("t")) {
            c.t_ladder = asLadder(l.at("t"), origin + ".ladders.t");
            for (double t : c.t_ladder) checkWeight(t, origin + ".ladders.t");
        }
        if (l.contains("z")) {
            c.z_ladder = asLadder(l.at("z"), origin + ".ladders.z");
            for (double z : c.z_ladder)
                if (!(z > 0.0 && z < c.family.epsilon))
                    throw Error(origin + ".ladders.z: radii must lie in (0, epsilon)");
        }
    }

    if (j.contains("mode")) {
        if (!j.at("mode").is_string()) throw Error(origin + ".mode: expected a string");
        c.mode = j.at("mode").get<std::string>();
        if (c.mode != "immersion" && c.mode != "normal" && c.mode != "both")
            throw Error(origin + ".mode: expected \"immersion\", \"normal\" or \"both\"");
    }

    if (j.contains("mesh")) {
        const auto& m = j.at("mesh");
        rejectUnknown(m, origin + ".mesh", {"n_r", "n_theta", "eps", "eps_prime"});
        if (m.contains("n_r")) c.mesh.n_r = asInt(m.at("n_r"), origin + ".mesh.n_r");
        if (m.contains("n_theta"))
            c.mesh.n_theta = asInt(m.at("n_theta"), origin + ".mesh.n_theta");
        if (c.mesh.n_r < 2 || c.mesh.n_theta < 3)
            throw Error(origin + ".mesh: need n_r >= 2 and n_theta >= 3");
        if (m.contains("eps")) c.mesh.eps = asNumber(m.at("eps"), origin + ".mesh.eps");
        if (m.contains("eps_prime"))
            c.mesh.eps_prime = m.at("eps_prime").is_array()
                                   ? asLadder(m.at("eps_prime"), origin + ".mesh.eps_prime")
                                   : std::vector<double>{
                                         asNumber(m.at("eps_prime"), origin + ".mesh.eps_prime")};
        if (!(c.mesh.eps > 0.0 && c.mesh.eps < c.family.epsilon))
            throw Error(origin + ".mesh.eps: must lie in (0, epsilon)");
        for (double e : c.mesh.eps_prime)
            if (!(e > 0.0 && e < c.mesh.eps))
                throw Error(origin + ".mesh.eps_prime: inner radii must lie in (0, eps)");
        std::sort(c.mesh.eps_prime.begin(), c.mesh.eps_prime.end(), std::greater<>());
    }

    if (j.contains("embedding")) {
        const auto& e = j.at("embedding");
        rejectUnknown(e, origin + ".embedding",
                      {"r_n_factor", "catenoidal_r_n", "normal_threshold", "probes", "run_scan"});
        if (e.contains("r_n_factor"))
            c.embedding.r_n_factor = asNumber(e.at("r_n_factor"), origin + ".embedding.r_n_factor");
        if (e.contains("catenoidal_r_n"))
            c.embedding.catenoidal_r_n =
                asNumber(e.at("catenoidal_r_n"), origin + ".embedding.catenoidal_r_n");
        if (e.contains("normal_threshold"))
            c.embedding.normal_threshold =
                asNumber(e.at("normal_threshold"), origin + ".embedding.normal_threshold");
        if (e.contains("probes"))
            c.embedding.probes = asInt(e.at("probes"), origin + ".embedding.probes");
        if (e.contains("run_scan")) {
            if (!e.at("run_scan").is_boolean())
                throw Error(origin + ".embedding.run_scan: expected a boolean");
            c.embedding.run_scan = e.at("run_scan").get<bool>();
        }
    }

    if (j.contains("prefix")) {
        if (!j.at("prefix").is_string()) throw Error(origin + ".prefix: expected a string");
        c.prefix = j.at("prefix").get<std::string>();
    }
    if (c.command == "convergence" && (c.t_ladder.empty() || c.z_ladder.empty()))
        throw Error(origin + ": convergence needs both ladders.t and ladders.z");
    return c;
}

ExperimentConfig loadConfig(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read config " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parseConfig(buf.str(), path);
}

void writeCsvRow(std::ostream& out, const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\r\n") != std::string::npos) {
            out << '"';
            for (char ch : f) {
                if (ch == '"') out << '"';
                out << ch;
            }
            out << '"';
        } else {
            out << f;
        }
    }
    out << "\r\n";
}

std::string formatDouble(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace dpw
