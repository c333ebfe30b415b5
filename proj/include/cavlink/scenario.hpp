// scenario.hpp: config parsing, presets and scenario orchestration behind the command-line tool

#pragma once

#include "cavlink/analysis.hpp"
#include "cavlink/dissipative.hpp"

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>

namespace cavlink::scenario {

using nlohmann::json;
using propagator::GateConvention;
using hilbert::DensityMatrix;
using hilbert::HilbertLayout;
using hilbert::StateVector;

enum class Kind { ideal, effective, full_open, fig2, noon, regime, gauge };
enum class Frame { raman, prime, effective };
enum class Method { automatic, schrodinger, mcwf, lindblad };
enum class Initial { ground, opposite };
enum class Convention { automatic, half, full };

struct ScenarioConfig {
    model::ModelParams model;
    std::optional<Kind> kind;
    std::string preset;
    char fig2_case = 0;
    Frame frame = Frame::raman;
    Method method = Method::automatic;
    Initial initial = Initial::ground;
    std::optional<double> tau;  // explicit protocol time
    int tau_K = 0;              // > 0: tau = 2 K pi / |delta|
    Convention convention = Convention::automatic;
    int K_max = 64;
    double timing_tolerance = pi / 8.0;
    std::size_t trajectories = 1;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::size_t samples = 200;
    double dt = 0.0;
    std::string out_dir = ".";
    std::string name;
    std::vector<std::string> warnings;
};

inline std::string kind_name(Kind k) {
    switch (k) {
        case Kind::ideal: return "ideal";
        case Kind::effective: return "effective";
        case Kind::full_open: return "full_open";
        case Kind::fig2: return "fig2";
        case Kind::noon: return "noon";
        case Kind::regime: return "regime";
        case Kind::gauge: return "gauge";
    }
    return "?";
}

inline std::string frame_name(Frame f) {
    switch (f) {
        case Frame::raman: return "raman";
        case Frame::prime: return "prime";
        case Frame::effective: return "effective";
    }
    return "?";
}

inline std::string method_name(Method m) {
    switch (m) {
        case Method::automatic: return "auto";
        case Method::schrodinger: return "schrodinger";
        case Method::mcwf: return "mcwf";
        case Method::lindblad: return "lindblad";
    }
    return "?";
}

// ---------------------------------------------------------------- presets

// Reference set with |Omega0| lowered to 1/sqrt2 so that Theta = delta/2: the dynamical gate angle
// 4|lambda|tau is then pi/2 at tau = 2 pi/delta. Small cutoffs suffice once kappa_c damps the field.
inline model::ModelParams fig2_params() {
    model::ModelParams p = model::reference_params();
    p.Omega0 = 1.0 / std::sqrt(2.0);
    p.n_max = 3;
    p.n_max_fiber = 2;
    return p;
}

struct Fig2Case {
    int N;
    double kappa_c;
};

inline Fig2Case fig2_case(char c) {
    switch (c) {
        case 'a': return {2, 0.1};
        case 'b': return {2, 0.5};
        case 'c': return {5, 0.1};
        case 'd': return {5, 0.5};
    }
    throw std::invalid_argument("fig2: case must be one of a, b, c, d");
}

// Pins (N, kappa_c) for a fig2 case; conflicting earlier values are overridden with a warning.
inline void apply_fig2_case(ScenarioConfig& cfg, char c, bool warn_n, bool warn_kappa) {
    const Fig2Case fc = fig2_case(c);
    cfg.fig2_case = c;
    auto& p = cfg.model;
    if (warn_n && (p.N1 != fc.N || p.N2 != fc.N))
        cfg.warnings.push_back(std::string("fig2 case ") + c + " overrides N1/N2 with " + std::to_string(fc.N));
    if (warn_kappa && p.kappa_c != fc.kappa_c)
        cfg.warnings.push_back(std::string("fig2 case ") + c + " overrides kappa_c with " + std::to_string(fc.kappa_c));
    p.N1 = p.N2 = fc.N;
    p.kappa_c = fc.kappa_c;
}

// ---------------------------------------------------------------- parsing

class config_error : public std::invalid_argument {
public:
    config_error(const std::string& key, int line, const std::string& what)
        : std::invalid_argument(line > 0 ? "config line " + std::to_string(line) + ", key '" + key + "': " + what
                                         : "config key '" + key + "': " + what),
          key_(key), line_(line) {}
    const std::string& key() const { return key_; }
    int line() const { return line_; }

private:
    std::string key_;
    int line_;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::optional<double> to_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

// "re", "im i", "re+im i", "re-im i"; spaces ignored.
inline std::optional<cplx> to_complex(const std::string& raw) {
    std::string s;
    for (char ch : raw)
        if (ch != ' ' && ch != '\t') s += ch;
    if (s.empty()) return std::nullopt;
    if (s.back() != 'i') {
        if (auto v = to_double(s)) return cplx{*v, 0.0};
        return std::nullopt;
    }
    s.pop_back();
    std::size_t split = std::string::npos;
    for (std::size_t k = s.size(); k-- > 1;)
        if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
            split = k;
            break;
        }
    auto imag = [](std::string t) -> std::optional<double> {
        if (t.empty() || t == "+") return 1.0;
        if (t == "-") return -1.0;
        return to_double(t);
    };
    if (split == std::string::npos) {
        if (auto v = imag(s)) return cplx{0.0, *v};
        return std::nullopt;
    }
    auto re = to_double(s.substr(0, split));
    auto im = imag(s.substr(split));
    if (!re || !im) return std::nullopt;
    return cplx{*re, *im};
}

template <class T>
std::optional<T> to_integer(std::string_view s) {
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

struct Entry {
    std::string key;  // section.key, or key at top level
    std::string value;
    int line;
};

}  // namespace detail

inline Kind parse_kind(const std::string& v, const std::string& key, int line) {
    static const std::pair<const char*, Kind> names[] = {
        {"ideal", Kind::ideal}, {"effective", Kind::effective}, {"full_open", Kind::full_open},
        {"fig2", Kind::fig2},   {"noon", Kind::noon},           {"regime", Kind::regime},
        {"gauge", Kind::gauge}};
    if (v.empty()) throw config_error(key, line, "scenario must not be empty");
    for (const auto& [n, k] : names)
        if (v == n) return k;
    throw config_error(key, line, "unknown scenario '" + v + "'");
}

inline model::ModelParams preset_params(const std::string& name, const std::string& key = "preset", int line = 0) {
    if (name == "paper-sec3") return model::reference_params();
    if (name == "fig2") return fig2_params();
    throw config_error(key, line, "unknown preset '" + name + "' (paper-sec3, fig2)");
}

// Flat key=value lines, '[section]' headers, '#' comments. Sections: top level, [model], [run], [output].
inline ScenarioConfig parse_config(const std::string& text) {
    using namespace detail;
    std::vector<Entry> entries;
    {
        std::istringstream in(text);
        std::string raw, section;
        int lineno = 0;
        while (std::getline(in, raw)) {
            ++lineno;
            const auto hash = raw.find('#');
            std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') throw config_error(line, lineno, "malformed section header");
                section = trim(line.substr(1, line.size() - 2));
                if (section != "model" && section != "run" && section != "output" && section != "scenario")
                    throw config_error(section, lineno, "unknown section");
                if (section == "scenario") section.clear();
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw config_error(line, lineno, "expected key = value");
            const std::string key = trim(line.substr(0, eq));
            if (key.empty()) throw config_error(line, lineno, "missing key");
            entries.push_back({section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)), lineno});
        }
    }

    ScenarioConfig cfg;
    // the preset applies first so explicit keys refine it regardless of order
    for (const auto& e : entries)
        if (e.key == "preset") {
            cfg.model = preset_params(e.value, e.key, e.line);
            cfg.preset = e.value;
        }

    bool set_N = false, set_kappa = false;
    std::optional<char> fig_case;
    int case_line = 0;
    auto real = [](const Entry& e) {
        if (auto v = to_double(e.value)) return *v;
        throw config_error(e.key, e.line, "expected a real number, got '" + e.value + "'");
    };
    auto complex = [](const Entry& e) {
        if (auto v = to_complex(e.value)) return *v;
        throw config_error(e.key, e.line, "expected a complex number 're+im i', got '" + e.value + "'");
    };
    auto integer = [](const Entry& e) {
        if (auto v = to_integer<long long>(e.value)) return *v;
        throw config_error(e.key, e.line, "expected an integer, got '" + e.value + "'");
    };
    auto count = [&](const Entry& e, long long lo) {
        const long long v = integer(e);
        if (v < lo) throw config_error(e.key, e.line, "must be >= " + std::to_string(lo));
        return v;
    };

    auto& p = cfg.model;
    for (const auto& e : entries) {
        const std::string& k = e.key;
        if (k == "preset") continue;
        if (k == "scenario") cfg.kind = parse_kind(e.value, k, e.line);
        else if (k == "case") {
            if (e.value.size() != 1 || e.value[0] < 'a' || e.value[0] > 'd')
                throw config_error(k, e.line, "case must be one of a, b, c, d");
            fig_case = e.value[0];
            case_line = e.line;
        }
        else if (k == "model.g0") p.g0 = complex(e);
        else if (k == "model.Omega0") p.Omega0 = complex(e);
        else if (k == "model.Omega1") p.Omega1 = complex(e);
        else if (k == "model.Omega2") p.Omega2 = complex(e);
        else if (k == "model.Omega3") p.Omega3 = complex(e);
        else if (k == "model.Delta0") p.Delta0 = real(e);
        else if (k == "model.Delta1") p.Delta1 = real(e);
        else if (k == "model.Delta3") p.Delta3 = real(e);
        else if (k == "model.delta") p.delta = real(e);
        else if (k == "model.nu") p.nu = real(e);
        else if (k == "model.phi") p.phi = real(e);
        else if (k == "model.kappa_c") { p.kappa_c = real(e); set_kappa = true; }
        else if (k == "model.kappa_f") p.kappa_f = real(e);
        else if (k == "model.gamma_e") p.gamma_e = real(e);
        else if (k == "model.N1") { p.N1 = static_cast<int>(count(e, 1)); set_N = true; }
        else if (k == "model.N2") { p.N2 = static_cast<int>(count(e, 1)); set_N = true; }
        else if (k == "model.n_max") p.n_max = static_cast<int>(count(e, 1));
        else if (k == "model.n_max_fiber") p.n_max_fiber = static_cast<int>(count(e, 0));
        else if (k == "run.frame") {
            if (e.value == "raman") cfg.frame = Frame::raman;
            else if (e.value == "prime") cfg.frame = Frame::prime;
            else if (e.value == "effective") cfg.frame = Frame::effective;
            else throw config_error(k, e.line, "frame must be raman, prime or effective");
        }
        else if (k == "run.method") {
            if (e.value == "auto") cfg.method = Method::automatic;
            else if (e.value == "schrodinger") cfg.method = Method::schrodinger;
            else if (e.value == "mcwf") cfg.method = Method::mcwf;
            else if (e.value == "lindblad") cfg.method = Method::lindblad;
            else throw config_error(k, e.line, "method must be auto, schrodinger, mcwf or lindblad");
        }
        else if (k == "run.initial") {
            if (e.value == "ground") cfg.initial = Initial::ground;
            else if (e.value == "opposite") cfg.initial = Initial::opposite;
            else throw config_error(k, e.line, "initial must be ground or opposite");
        }
        else if (k == "run.tau") {
            if (e.value == "auto") cfg.tau.reset();
            else {
                const double v = real(e);
                if (!(v > 0.0)) throw config_error(k, e.line, "tau must be > 0");
                cfg.tau = v;
            }
        }
        else if (k == "run.tau_K") cfg.tau_K = static_cast<int>(count(e, 1));
        else if (k == "run.convention") {
            if (e.value == "auto") cfg.convention = Convention::automatic;
            else if (e.value == "half") cfg.convention = Convention::half;
            else if (e.value == "full") cfg.convention = Convention::full;
            else throw config_error(k, e.line, "convention must be auto, half or full");
        }
        else if (k == "run.K_max") cfg.K_max = static_cast<int>(count(e, 1));
        else if (k == "run.timing_tolerance") cfg.timing_tolerance = real(e);
        else if (k == "run.trajectories") cfg.trajectories = static_cast<std::size_t>(count(e, 1));
        else if (k == "run.seed") {
            if (auto v = to_integer<std::uint64_t>(e.value)) cfg.seed = *v;
            else throw config_error(k, e.line, "expected an unsigned 64-bit integer, got '" + e.value + "'");
        }
        else if (k == "run.threads") cfg.threads = static_cast<unsigned>(count(e, 1));
        else if (k == "run.samples") cfg.samples = static_cast<std::size_t>(count(e, 2));
        else if (k == "run.dt") {
            const double v = real(e);
            if (v < 0.0) throw config_error(k, e.line, "dt must be >= 0 (0 selects the default step)");
            cfg.dt = v;
        }
        else if (k == "output.dir") cfg.out_dir = e.value;
        else if (k == "output.name") cfg.name = e.value;
        else throw config_error(k, e.line, "unknown key");
    }

    if (fig_case) {
        if (cfg.kind && *cfg.kind != Kind::fig2)
            throw config_error("case", case_line, "case is only valid with scenario = fig2");
        apply_fig2_case(cfg, *fig_case, set_N, set_kappa);
    }
    try {
        p.validate();
    } catch (const std::invalid_argument& ex) {
        // name the offending key and its line
        const std::string msg = ex.what();
        for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
            const auto dot = it->key.find('.');
            const std::string bare = dot == std::string::npos ? it->key : it->key.substr(dot + 1);
            if (msg.find(" " + bare + " ") != std::string::npos) throw config_error(it->key, it->line, msg);
        }
        throw config_error("model", 0, msg);
    }
    return cfg;
}

// ---------------------------------------------------------------- JSON helpers

inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json complex_json(cplx z) { return json::array({number(z.real()), number(z.imag())}); }

inline json to_json(const model::ModelParams& p) {
    return {{"g0", complex_json(p.g0)},       {"Omega0", complex_json(p.Omega0)}, {"Omega1", complex_json(p.Omega1)},
            {"Omega2", complex_json(p.Omega2)}, {"Omega3", complex_json(p.Omega3)}, {"Delta0", p.Delta0},
            {"Delta1", p.Delta1},             {"Delta2", p.Delta2()},             {"Delta3", p.Delta3},
            {"delta", p.delta},               {"nu", p.nu},                       {"phi", p.phi},
            {"kappa_c", p.kappa_c},           {"kappa_f", p.kappa_f},             {"gamma_e", p.gamma_e},
            {"N1", p.N1},                     {"N2", p.N2},                       {"n_max", p.n_max},
            {"n_max_fiber", p.fiber_cutoff()}};
}

inline json to_json(const model::DerivedConstants& d) {
    return {{"beta", complex_json(d.beta)}, {"Lambda", complex_json(d.Lambda)}, {"Theta", d.Theta},
            {"theta0", d.theta0},           {"lambda", d.lambda},               {"Gamma_c", number(d.Gamma_c)},
            {"Gamma_e", number(d.Gamma_e)}, {"Gamma_f", number(d.Gamma_f)}};
}

inline json to_json(const std::vector<model::NamedRatio>& v) {
    json j = json::object();
    for (const auto& r : v) j[r.name] = number(r.value);
    return j;
}

inline json to_json(const model::RegimeReport& r) {
    return {{"condition_i", to_json(r.condition_i)},
            {"condition_i_min", number(r.condition_i_min)},
            {"condition_ii", to_json(r.condition_ii)},
            {"condition_ii_min", number(r.condition_ii_min)},
            {"condition_iii", to_json(r.condition_iii)},
            {"strong_driving_ratio", number(r.strong_driving_ratio)},
            {"mode_separation_ratio", number(r.mode_separation_ratio)},
            {"stark_shift_level0", r.stark_shift_level0},
            {"stark_shift_level1", r.stark_shift_level1},
            {"stark_differential", r.stark_differential},
            {"thresholds",
             {{"much_greater", r.thresholds.much_greater},
              {"similar", r.thresholds.similar},
              {"stark_tolerance", r.thresholds.stark_tolerance}}},
            {"pass",
             {{"condition_i", r.pass_i},
              {"condition_ii", r.pass_ii},
              {"condition_iii_literal", r.pass_iii_literal},
              {"condition_iii_stark", r.pass_iii_stark},
              {"strong_driving", r.pass_strong_driving},
              {"mode_separation", r.pass_mode_separation},
              {"all", r.all_pass()}}}};
}

inline json to_json(const propagator::ProtocolTiming& t) {
    return {{"tau", t.tau},
            {"K", t.K},
            {"lambda_tau", t.lambda_tau},
            {"phase_mismatch", t.phase_mismatch},
            {"convention", t.convention == GateConvention::full_eigenvalue ? "full" : "half"}};
}

// ---------------------------------------------------------------- running

struct Row {
    double t;
    analysis::ObservableSample obs;
};

struct RunResult {
    std::vector<Row> rows;  // empty for scenarios without a time series
    json summary;
    std::vector<dissipative::TrajectoryResult> trajectories;
};

inline GateConvention convention_for(const ScenarioConfig& cfg, bool dynamical) {
    if (cfg.convention == Convention::half) return GateConvention::half_eigenvalue;
    if (cfg.convention == Convention::full) return GateConvention::full_eigenvalue;
    return dynamical ? GateConvention::full_eigenvalue : GateConvention::half_eigenvalue;
}

inline propagator::ProtocolTiming resolve_timing(const ScenarioConfig& cfg, bool dynamical) {
    const GateConvention conv = convention_for(cfg, dynamical);
    const auto& p = cfg.model;
    if (cfg.tau_K > 0) return propagator::timing_for_K(p, cfg.tau_K, conv);
    if (cfg.tau) {
        const auto d = model::derived_constants(p);
        propagator::ProtocolTiming t;
        t.convention = conv;
        t.tau = *cfg.tau;
        t.K = 0;
        t.lambda_tau = propagator::gate_scale(conv) * d.lambda * t.tau;
        t.phase_mismatch = std::abs(std::abs(t.lambda_tau) - pi / 2.0);
        return t;
    }
    return propagator::choose_protocol_time(p, {conv, cfg.K_max, cfg.timing_tolerance});
}

inline int phase_sign(double lambda_tau) { return lambda_tau < 0.0 ? -1 : 1; }

inline analysis::TargetKind target_kind(const ScenarioConfig& cfg) {
    return cfg.initial == Initial::ground ? analysis::TargetKind::psi_a : analysis::TargetKind::psi_s;
}

inline StateVector initial_atoms(const ScenarioConfig& cfg) {
    const auto& p = cfg.model;
    const std::size_t m2 = cfg.initial == Initial::ground ? 0 : static_cast<std::size_t>(p.N2);
    return StateVector::basis(propagator::atoms_layout(p.N1, p.N2), {0, m2});
}

inline json base_summary(const ScenarioConfig& cfg) {
    json s;
    s["scenario"] = cfg.kind ? kind_name(*cfg.kind) : "";
    s["preset"] = cfg.preset;
    if (cfg.fig2_case) s["case"] = std::string(1, cfg.fig2_case);
    s["model"] = to_json(cfg.model);
    s["derived"] = to_json(model::derived_constants(cfg.model));
    s["regime"] = to_json(model::regime_report(cfg.model));
    s["warnings"] = cfg.warnings;
    return s;
}

inline RunResult run_ideal(const ScenarioConfig& cfg) {
    const auto& p = cfg.model;
    const auto timing = resolve_timing(cfg, false);
    const int sign = phase_sign(timing.lambda_tau);
    const StateVector init = initial_atoms(cfg);
    const StateVector target = analysis::target_state(target_kind(cfg), p.N1, p.N2, sign);
    const auto br = analysis::branches(target_kind(cfg), p.N1, p.N2);
    RunResult r;
    for (std::size_t i = 0; i < cfg.samples; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(cfg.samples - 1);
        const StateVector psi = propagator::protocol_final_state(init, timing.lambda_tau * frac);
        r.rows.push_back({timing.tau * frac, analysis::observables(DensityMatrix::pure(psi), br, target)});
    }
    r.summary = base_summary(cfg);
    r.summary["timing"] = to_json(timing);
    r.summary["target"] = {{"kind", target_kind(cfg) == analysis::TargetKind::psi_a ? "psi_a" : "psi_s"},
                           {"phase_sign", sign}};
    r.summary["method"] = "closed_form";
    r.summary["final"] = {{"fidelity", r.rows.back().obs.fidelity},
                          {"P_ground", r.rows.back().obs.P_ground},
                          {"P_excited", r.rows.back().obs.P_excited},
                          {"coh_re", r.rows.back().obs.coh_re},
                          {"coh_im", r.rows.back().obs.coh_im}};
    return r;
}

struct FrameSetup {
    HilbertLayout layout;
    TimeDependentOperator h;
    dissipative::CollapseSet collapses;
    StateVector psi0;
    bool rotate = false;  // observables need the driving-frame rotation
};

inline FrameSetup build_frame(const ScenarioConfig& cfg, Frame frame) {
    const auto& p = cfg.model;
    FrameSetup f;
    const std::size_t m2 = cfg.initial == Initial::ground ? 0 : static_cast<std::size_t>(p.N2);
    auto embed_mode = [&](const std::string& lab, const HilbertLayout& l) {
        return hilbert::embed(hilbert::boson_ops(l.factor(l.slot(lab)).size).a, lab, l);
    };
    switch (frame) {
        case Frame::raman: {
            f.layout = model::raman_layout(p, true);
            f.h = model::raman_source(p, f.layout);
            f.h += model::cavity_fiber_source(p, f.layout);
            f.collapses = dissipative::CollapseSet(f.layout);
            f.collapses.add(embed_mode("a1", f.layout), p.kappa_c, "a1");
            f.collapses.add(embed_mode("a2", f.layout), p.kappa_c, "a2");
            f.collapses.add(embed_mode("b", f.layout), p.kappa_f, "b");
            f.psi0 = StateVector::basis(f.layout, {0, m2, 0, 0, 0});
            f.rotate = true;
            break;
        }
        case Frame::prime: {
            f.layout = model::normal_mode_layout(p);
            f.h = model::prime_source(p, f.layout);
            f.collapses = dissipative::CollapseSet(f.layout);
            const auto c = embed_mode("c", f.layout), c1 = embed_mode("c1", f.layout), c2 = embed_mode("c2", f.layout);
            const double r = 1.0 / std::sqrt(2.0);
            f.collapses.add(c, p.kappa_c, "c");
            f.collapses.add(cplx(r) * (c1 + c2), p.kappa_c, "c1+c2");
            f.collapses.add(cplx(r) * (c1 - c2), p.kappa_f, "b");
            f.psi0 = StateVector::basis(f.layout, {0, m2, 0, 0, 0});
            f.rotate = true;
            break;
        }
        case Frame::effective: {
            f.layout = model::effective_layout(p);
            f.h = model::effective_source(p, f.layout);
            f.collapses = dissipative::CollapseSet(f.layout);
            f.collapses.add(embed_mode("c", f.layout), p.kappa_c, "c");
            f.psi0 = StateVector::basis(f.layout, {0, m2, 0});
            break;
        }
    }
    return f;
}

inline RunResult run_dynamics(const ScenarioConfig& cfg, Frame frame) {
    const auto& p = cfg.model;
    const auto timing = resolve_timing(cfg, true);
    const int sign = phase_sign(timing.lambda_tau);
    const StateVector target = analysis::target_state(target_kind(cfg), p.N1, p.N2, sign);
    const auto br = analysis::branches(target_kind(cfg), p.N1, p.N2);
    const FrameSetup f = build_frame(cfg, frame);

    auto measure = [&](double t, const DensityMatrix& rho_atoms) {
        const DensityMatrix r = f.rotate ? analysis::driving_frame(rho_atoms, p, t) : rho_atoms;
        return analysis::observables(r, br, target);
    };
    const std::vector<std::string> atoms{"cloud1", "cloud2"};

    Method method = cfg.method;
    if (method == Method::automatic) method = f.collapses.empty() ? Method::schrodinger : Method::mcwf;
    if (method == Method::schrodinger && !f.collapses.empty())
        throw std::invalid_argument("scenario: method schrodinger ignores nonzero decay rates");

    RunResult r;
    r.summary = base_summary(cfg);
    r.summary["timing"] = to_json(timing);
    r.summary["target"] = {{"kind", target_kind(cfg) == analysis::TargetKind::psi_a ? "psi_a" : "psi_s"},
                           {"phase_sign", sign}};
    r.summary["frame"] = frame_name(frame);
    r.summary["method"] = method_name(method);
    r.summary["hilbert_dim"] = f.layout.total_dim();
    json monitor;

    if (method == Method::schrodinger) {
        propagator::EvolveOptions opt;
        opt.dt = cfg.dt;
        opt.samples = cfg.samples;
        opt.observer = [&](double t, const Vec& psi) {
            r.rows.push_back({t, measure(t, analysis::partial_trace(StateVector::normalized(f.layout, psi), atoms))});
        };
        const auto res = propagator::evolve_schrodinger(f.h, f.psi0, 0.0, timing.tau, opt);
        monitor = {{"norm_drift", res.norm_drift},
                   {"top_fock", res.max_top_fock.value},
                   {"top_fock_mode", res.max_top_fock.label},
                   {"dt", res.dt},
                   {"steps", res.steps}};
    } else if (method == Method::lindblad) {
        dissipative::LindbladOptions opt;
        opt.dt = cfg.dt;
        opt.samples = cfg.samples;
        opt.observer = [&](double t, const Mat& rho) {
            r.rows.push_back({t, measure(t, analysis::partial_trace(DensityMatrix(f.layout, rho), atoms))});
        };
        const auto res = dissipative::lindblad_evolve(DensityMatrix::pure(f.psi0), f.h, f.collapses, 0.0,
                                                      timing.tau, opt);
        monitor = {{"trace_drift", res.trace_drift},
                   {"min_eigenvalue", res.min_eigenvalue},
                   {"top_fock", res.max_top_fock.value},
                   {"top_fock_mode", res.max_top_fock.label},
                   {"dt", res.dt},
                   {"steps", res.steps}};
    } else {
        dissipative::EnsembleOptions opt;
        opt.n_traj = cfg.trajectories;
        opt.base_seed = cfg.seed;
        opt.threads = cfg.threads;
        opt.keep_trajectories = true;
        opt.trajectory.dt = cfg.dt;
        opt.trajectory.samples = cfg.samples;
        opt.trajectory.sampler = [&](double t, const StateVector& psi) {
            return measure(t, analysis::partial_trace(psi, atoms)).row();
        };
        auto ens = dissipative::mcwf_ensemble(f.psi0, f.h, f.collapses, 0.0, timing.tau, opt);
        for (std::size_t i = 0; i < ens.times.size(); ++i) {
            const auto& m = ens.mean[i];
            r.rows.push_back({ens.times[i], {m[0], m[1], m[2], m[3], m[4]}});
        }
        monitor = {{"top_fock", ens.max_top_fock.value},
                   {"top_fock_mode", ens.max_top_fock.label},
                   {"max_step_jump_probability", ens.max_step_jump_probability},
                   {"dt", ens.trajectories.empty() ? 0.0 : ens.trajectories[0].dt}};
        r.summary["trajectories"] = ens.n_traj;
        r.summary["base_seed"] = cfg.seed;
        r.summary["seeds"] = ens.seeds;
        r.summary["jump_counts"] = ens.jump_counts;
        if (ens.std_error_defined) r.summary["final_fidelity_std_error"] = ens.std_error.back()[4];
        else r.summary["final_fidelity_std_error"] = nullptr;
        r.trajectories = std::move(ens.trajectories);
    }
    r.summary["monitor"] = monitor;
    const auto& last = r.rows.back().obs;
    r.summary["final"] = {{"fidelity", last.fidelity},
                          {"P_ground", last.P_ground},
                          {"P_excited", last.P_excited},
                          {"coh_re", last.coh_re},
                          {"coh_im", last.coh_im}};
    return r;
}

inline RunResult run_noon(const ScenarioConfig& cfg) {
    const auto& p = cfg.model;
    ScenarioConfig c = cfg;
    c.initial = Initial::opposite;
    const auto timing = resolve_timing(c, false);
    const int sign = phase_sign(timing.lambda_tau);
    const StateVector psi_s = propagator::protocol_final_state(initial_atoms(c), timing.lambda_tau);
    const int cutoff = std::max({p.N1, p.N2, p.n_max});
    const HilbertLayout l({hilbert::dicke(p.N1, "cloud1"), hilbert::dicke(p.N2, "cloud2"),
                           hilbert::boson(cutoff, "a1"), hilbert::boson(cutoff, "a2")});
    Vec vac = Vec::Zero((cutoff + 1) * (cutoff + 1));
    vac(0) = 1.0;
    const StateVector in(l, kron(psi_s.amplitudes, vac));
    const StateVector out = propagator::noon_map(in);
    const StateVector target = analysis::noon_target(p.N1, p.N2, cutoff, sign);
    RunResult r;
    r.summary = base_summary(cfg);
    r.summary["timing"] = to_json(timing);
    r.summary["noon"] = {{"cutoff", cutoff}, {"phase_sign", sign}, {"fidelity", analysis::fidelity(out, target)}};
    r.summary["final"] = {{"fidelity", analysis::fidelity(out, target)}};
    return r;
}

inline RunResult run_regime(const ScenarioConfig& cfg) {
    RunResult r;
    r.summary = base_summary(cfg);
    return r;
}

struct GaugeCheck {
    double spectrum_difference = 0.0;
    double phase_matched_residual = 0.0;  // H_after vs the position-free Hamiltonian when k3 = k1 - k2
};

// Random wave vectors and positions drawn from `seed`.
inline GaugeCheck gauge_check(const model::ModelParams& p, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    auto u = [&] { return 2.0 * dissipative::uniform01(g) - 1.0; };
    auto vec3 = [&](double scale) { return model::Vec3{scale * u(), scale * u(), scale * u()}; };
    model::WaveVectors k{vec3(10.0), vec3(10.0), vec3(10.0)};
    std::vector<model::Vec3> pos;
    for (int i = 0; i < p.N1 + p.N2; ++i) pos.push_back(vec3(3.0));
    const HilbertLayout l = model::gauge_layout(p);
    GaugeCheck c;
    const auto gr = model::gauge_reduce(p, k, pos, l);
    const RVec e0 = hermitian_eigenvalues(gr.H_before.dense()), e1 = hermitian_eigenvalues(gr.H_after.dense());
    c.spectrum_difference = (e0 - e1).cwiseAbs().maxCoeff();
    for (int i = 0; i < 3; ++i) k.k3[i] = k.k1[i] - k.k2[i];
    const auto matched = model::gauge_reduce(p, k, pos, l);
    const auto plain = model::gauge_reduce(p, k, std::vector<model::Vec3>(pos.size(), model::Vec3{0, 0, 0}), l);
    c.phase_matched_residual = max_abs(SpMat(matched.H_after.matrix - plain.H_before.matrix));
    return c;
}

inline RunResult run_gauge(const ScenarioConfig& cfg) {
    ScenarioConfig c = cfg;
    c.model.n_max = std::min(c.model.n_max, 2);
    const GaugeCheck g = gauge_check(c.model, cfg.seed);
    RunResult r;
    r.summary = base_summary(c);
    r.summary["gauge"] = {{"seed", cfg.seed},
                          {"spectrum_difference", g.spectrum_difference},
                          {"phase_matched_residual", g.phase_matched_residual}};
    return r;
}

inline RunResult run_scenario(const ScenarioConfig& cfg) {
    if (!cfg.kind) throw config_error("scenario", 0, "scenario is not set");
    switch (*cfg.kind) {
        case Kind::ideal: return run_ideal(cfg);
        case Kind::effective: return run_dynamics(cfg, Frame::effective);
        case Kind::full_open: return run_dynamics(cfg, cfg.frame);
        case Kind::fig2: return run_dynamics(cfg, cfg.frame);
        case Kind::noon: return run_noon(cfg);
        case Kind::regime: return run_regime(cfg);
        case Kind::gauge: return run_gauge(cfg);
    }
    throw std::logic_error("run_scenario: unhandled scenario");
}

// ---------------------------------------------------------------- output

inline std::string format_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(std::ostream& os, const std::vector<Row>& rows) {
    os << "t,P_ground,P_excited,coh_re,coh_im,fidelity\n";
    for (const auto& r : rows)
        os << format_g17(r.t) << ',' << format_g17(r.obs.P_ground) << ',' << format_g17(r.obs.P_excited) << ','
           << format_g17(r.obs.coh_re) << ',' << format_g17(r.obs.coh_im) << ',' << format_g17(r.obs.fidelity) << '\n';
}

inline std::string default_name(const ScenarioConfig& cfg) {
    if (!cfg.name.empty()) return cfg.name;
    std::string n = cfg.kind ? kind_name(*cfg.kind) : "run";
    if (cfg.fig2_case) n += cfg.fig2_case;
    return n;
}

// Writes <name>.json, plus <name>.csv for time series and <name>_jumps.csv for trajectories.
inline std::vector<std::string> write_outputs(const ScenarioConfig& cfg, const RunResult& r) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const std::string base = (fs::path(cfg.out_dir) / default_name(cfg)).string();
    std::vector<std::string> written;
    auto open = [&](const std::string& path) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + path + "'");
        written.push_back(path);
        return f;
    };
    {
        auto f = open(base + ".json");
        f << r.summary.dump(2) << '\n';
    }
    if (!r.rows.empty()) {
        auto f = open(base + ".csv");
        write_csv(f, r.rows);
    }
    if (!r.trajectories.empty()) {
        auto f = open(base + "_jumps.csv");
        dissipative::write_jump_log(f, r.trajectories);
    }
    return written;
}

}  // namespace cavlink::scenario
