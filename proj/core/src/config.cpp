#include "oswitch/config.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

extern char** environ;

namespace oswitch {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw StructuralError("config " + path + ": " + what);
}

const json& need(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.is_object() || !obj.contains(key)) fail(path + "/" + key, "missing");
    return obj.at(key);
}

double need_number(const json& obj, const std::string& path, const std::string& key) {
    const json& v = need(obj, path, key);
    if (!v.is_number()) fail(path + "/" + key, "expected a number");
    return v.get<double>();
}

std::vector<double> need_array(const json& obj, const std::string& path,
                               const std::string& key, std::size_t len) {
    const json& v = need(obj, path, key);
    if (!v.is_array() || (len != 0 && v.size() != len))
        fail(path + "/" + key, "expected an array of " + std::to_string(len) + " numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) fail(path + "/" + key, "expected numeric entries");
        out.push_back(e.get<double>());
    }
    return out;
}

std::vector<double> opt_array(const json& obj, const std::string& path,
                              const std::string& key, std::size_t len, double def) {
    if (!obj.contains(key)) return std::vector<double>(len, def);
    return need_array(obj, path, key, len);
}

void validate_schema(const json& cfg) {
    const json& problem = need(cfg, "", "problem");
    const int m = static_cast<int>(need_number(problem, "/problem", "modes"));
    if (m < 1) fail("/problem/modes", "must be >= 1");
    const json& costs = need(problem, "/problem", "costs");
    if (!costs.is_array() || static_cast<int>(costs.size()) != m)
        fail("/problem/costs", "expected an m x m matrix");
    for (const auto& row : costs)
        if (!row.is_array() || static_cast<int>(row.size()) != m)
            fail("/problem/costs", "expected an m x m matrix");
    if (need_number(problem, "/problem", "horizon") <= 0.0)
        fail("/problem/horizon", "must be positive");
    need(problem, "/problem", "generator");
    need(problem, "/problem", "terminal");
    const json& solver = need(cfg, "", "solver");
    const json& lattice = need(solver, "/solver", "lattice");
    if (need_number(lattice, "/solver/lattice", "steps") < 1)
        fail("/solver/lattice/steps", "must be >= 1");
    need(cfg, "", "checks");
}

double affine_eval(double c0, double c1, double x) { return c0 + c1 * x; }

}  // namespace

json parse_config(const std::string& text) {
    json cfg;
    try {
        cfg = json::parse(text);
    } catch (const json::exception& e) {
        throw StructuralError(std::string("config parse error: ") + e.what());
    }
    validate_schema(cfg);
    return cfg;
}

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("config file not readable: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void apply_env_overrides(json& config) {
    static const std::string prefix = "OSWITCH_";
    for (char** e = environ; *e; ++e) {
        const std::string entry(*e);
        if (entry.rfind(prefix, 0) != 0) continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        std::string key = entry.substr(prefix.size(), eq - prefix.size());
        const std::string value = entry.substr(eq + 1);
        std::string pointer;
        std::size_t pos = 0;
        while (pos < key.size()) {
            const auto sep = key.find("__", pos);
            pointer += "/" + key.substr(pos, sep == std::string::npos ? sep : sep - pos);
            if (sep == std::string::npos) break;
            pos = sep + 2;
        }
        json parsed;
        try {
            parsed = json::parse(value);
        } catch (const json::exception&) {
            parsed = value;
        }
        config[json::json_pointer(pointer)] = parsed;
    }
    validate_schema(config);
}

std::string config_hash(const json& config) {
    const std::string dump = config.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SwitchingStructure build_structure(const json& problem) {
    const int m = problem.at("modes").get<int>();
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m) * m);
    for (const auto& row : problem.at("costs"))
        for (const auto& e : row) flat.push_back(e.get<double>());
    return SwitchingStructure(m, flat);
}

Generator build_generator(const json& problem) {
    const int m = problem.at("modes").get<int>();
    const json& spec = problem.at("generator");
    const std::string id = need(spec, "/problem/generator", "id").get<std::string>();

    Generator g;
    if (id == "constant") {
        auto values = need_array(spec, "/problem/generator", "values", m);
        g.psi = [values](double, double, std::span<const double>, int mode,
                         std::span<const double>) { return values[mode]; };
        g.lipschitz = 0.0;
    } else if (id == "linear") {
        auto a = opt_array(spec, "/problem/generator", "a", m, 0.0);
        auto bz = opt_array(spec, "/problem/generator", "bz", m, 0.0);
        auto c = opt_array(spec, "/problem/generator", "c", m, 0.0);
        g.psi = [a, bz, c](double, double y, std::span<const double> z, int mode,
                           std::span<const double>) {
            double acc = a[mode] * y + c[mode];
            if (!z.empty()) acc += bz[mode] * z[0];
            return acc;
        };
        double lip = 0.0;
        for (int i = 0; i < m; ++i) lip = std::max(lip, std::abs(a[i]) + std::abs(bz[i]));
        g.lipschitz = lip;
    } else if (id == "running_cost") {
        const json& mk = need(problem, "/problem", "markovian");
        auto l0 = opt_array(mk, "/problem/markovian", "l_const", m, 0.0);
        auto l1 = opt_array(mk, "/problem/markovian", "l_lin", m, 0.0);
        auto l2 = opt_array(mk, "/problem/markovian", "l_quad", m, 0.0);
        auto bm = opt_array(mk, "/problem/markovian", "drift_mode", m, 0.0);
        g.psi = [l0, l1, l2, bm](double, double, std::span<const double> z, int mode,
                                 std::span<const double> state) {
            const double x = state.empty() ? 0.0 : state[0];
            double acc = l0[mode] + l1[mode] * x + l2[mode] * x * x;
            if (!z.empty()) acc += bm[mode] * z[0];
            return acc;
        };
        double lip = 0.0;
        for (int i = 0; i < m; ++i) lip = std::max(lip, std::abs(bm[i]));
        g.lipschitz = lip;
    } else {
        fail("/problem/generator/id", "unknown generator '" + id + "'");
    }
    if (spec.contains("lipschitz")) g.lipschitz = spec.at("lipschitz").get<double>();
    return g;
}

TerminalCondition build_terminal(const json& problem) {
    const int m = problem.at("modes").get<int>();
    const json& spec = problem.at("terminal");
    const std::string id = need(spec, "/problem/terminal", "id").get<std::string>();
    if (id == "constant")
        return TerminalCondition::constant(need_array(spec, "/problem/terminal", "values", m));
    if (id == "affine" || id == "quadratic") {
        auto a = opt_array(spec, "/problem/terminal", "alpha", m, 0.0);
        auto b = opt_array(spec, "/problem/terminal", "beta", m, 0.0);
        auto c = id == "quadratic" ? opt_array(spec, "/problem/terminal", "gamma", m, 0.0)
                                   : std::vector<double>(m, 0.0);
        return TerminalCondition::function(
            [a, b, c](std::span<const double> x, int mode) {
                const double v = x.empty() ? 0.0 : x[0];
                return a[mode] + b[mode] * v + c[mode] * v * v;
            });
    }
    fail("/problem/terminal/id", "unknown terminal '" + id + "'");
}

StateMapSpec build_state_map(const json& problem) {
    StateMapSpec out;
    if (!problem.contains("state")) return out;
    const json& spec = problem.at("state");
    const std::string id = need(spec, "/problem/state", "id").get<std::string>();
    if (id == "none") return out;
    if (id == "arithmetic") {
        out.has_map = true;
        out.map = arithmetic_state(need_number(spec, "/problem/state", "x0"),
                                   spec.value("drift", 0.0),
                                   need_number(spec, "/problem/state", "sigma"));
        return out;
    }
    if (id == "geometric") {
        out.has_map = true;
        out.map = geometric_state(need_number(spec, "/problem/state", "x0"),
                                  need_number(spec, "/problem/state", "sigma"));
        return out;
    }
    fail("/problem/state/id", "unknown state map '" + id + "'");
}

bool has_markovian_block(const json& problem) { return problem.contains("markovian"); }

MarkovianCoefficients build_markovian(const json& problem) {
    const json& mk = need(problem, "/problem", "markovian");
    const double b0 = mk.value("b_const", 0.0), b1 = mk.value("b_lin", 0.0);
    const double s0 = need_number(mk, "/problem/markovian", "sigma_const");
    const double s1 = mk.value("sigma_lin", 0.0);
    MarkovianCoefficients c;
    c.b = [b0, b1](double, double x) { return affine_eval(b0, b1, x); };
    c.sigma = [s0, s1](double, double x) { return affine_eval(s0, s1, x); };
    c.psi = build_generator(problem);
    c.terminal = build_terminal(problem);
    return c;
}

DiffusionSpec build_diffusion(const json& problem) {
    const json& mk = need(problem, "/problem", "markovian");
    DiffusionSpec spec;
    spec.x0 = need_number(mk, "/problem/markovian", "x0");
    const double s0 = need_number(mk, "/problem/markovian", "sigma_const");
    const double s1 = mk.value("sigma_lin", 0.0);
    spec.sigma = [s0, s1](double, double x) { return affine_eval(s0, s1, x); };
    return spec;
}

CostModel build_cost_model(const json& problem) {
    const int m = problem.at("modes").get<int>();
    const json& mk = need(problem, "/problem", "markovian");
    auto l0 = opt_array(mk, "/problem/markovian", "l_const", m, 0.0);
    auto l1 = opt_array(mk, "/problem/markovian", "l_lin", m, 0.0);
    auto l2 = opt_array(mk, "/problem/markovian", "l_quad", m, 0.0);
    auto bm = opt_array(mk, "/problem/markovian", "drift_mode", m, 0.0);
    CostModel cost;
    cost.running = [l0, l1, l2](double, double x, int mode) {
        return l0[mode] + l1[mode] * x + l2[mode] * x * x;
    };
    cost.drift = [bm](double, double, int mode) { return bm[mode]; };
    cost.terminal = build_terminal(problem);
    return cost;
}

PdeGridSpec build_pde_spec(const json& config) {
    const json& solver = need(config, "", "solver");
    const json& pde = need(solver, "/solver", "pde");
    PdeGridSpec spec;
    spec.x_min = need_number(pde, "/solver/pde", "x_min");
    spec.x_max = need_number(pde, "/solver/pde", "x_max");
    spec.space_nodes = static_cast<int>(need_number(pde, "/solver/pde", "space_nodes"));
    spec.time_steps = static_cast<int>(need_number(pde, "/solver/pde", "time_steps"));
    spec.T = need_number(config.at("problem"), "/problem", "horizon");
    return spec;
}

}  // namespace oswitch
