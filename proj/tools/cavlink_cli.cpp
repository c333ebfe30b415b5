#include "cavlink/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace cavlink;
using namespace cavlink::scenario;

namespace {

enum Exit { ok = 0, failure = 1, bad_config = 2, tolerance = 3 };

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trajectories;
    std::optional<unsigned> threads;
    std::string out;
    std::string fig2_case;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "config file (key = value with [model]/[run]/[output] sections)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "base seed for trajectory streams");
    sub->add_option("--trajectories", f.trajectories, "trajectory count")->check(CLI::PositiveNumber);
    sub->add_option("--threads", f.threads, "worker threads for ensembles")->check(CLI::PositiveNumber);
    sub->add_option("--out", f.out, "output directory");
}

ScenarioConfig load(const Flags& f, Kind kind) {
    ScenarioConfig cfg;
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        std::ostringstream os;
        os << in.rdbuf();
        cfg = parse_config(os.str());
    }
    if (cfg.kind && *cfg.kind != kind && !(kind == Kind::effective && *cfg.kind == Kind::full_open))
        cfg.warnings.push_back("config scenario '" + kind_name(*cfg.kind) + "' replaced by the subcommand");
    if (kind != Kind::effective || !cfg.kind) cfg.kind = kind;
    if (cfg.preset.empty() && f.config.empty()) {
        cfg.preset = kind == Kind::fig2 ? "fig2" : "paper-sec3";
        cfg.model = preset_params(cfg.preset);
    }
    if (kind == Kind::fig2) {
        if (f.fig2_case.empty() && !cfg.fig2_case) throw config_error("case", 0, "fig2 needs --case a|b|c|d");
        if (!f.fig2_case.empty()) apply_fig2_case(cfg, f.fig2_case[0], !f.config.empty(), !f.config.empty());
    }
    if (f.seed) cfg.seed = *f.seed;
    if (f.trajectories) cfg.trajectories = *f.trajectories;
    if (f.threads) cfg.threads = *f.threads;
    if (!f.out.empty()) cfg.out_dir = f.out;
    return cfg;
}

int run(const Flags& f, Kind kind) {
    try {
        const ScenarioConfig cfg = load(f, kind);
        for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
        const RunResult r = run_scenario(cfg);
        for (const auto& path : write_outputs(cfg, r)) std::cout << "wrote " << path << '\n';
        if (r.summary.contains("final")) std::cout << "final fidelity " << format_g17(r.summary["final"]["fidelity"].get<double>()) << '\n';
        if (r.summary.contains("gauge"))
            std::cout << "spectrum difference " << format_g17(r.summary["gauge"]["spectrum_difference"].get<double>())
                      << ", phase-matched residual "
                      << format_g17(r.summary["gauge"]["phase_matched_residual"].get<double>()) << '\n';
        if (kind == Kind::regime) {
            const auto& rg = r.summary["regime"];
            std::cout << "stark_shift_level0 " << format_g17(rg["stark_shift_level0"].get<double>())
                      << "\nall conditions pass: " << (rg["pass"]["all"].get<bool>() ? "yes" : "no") << '\n';
        }
        return ok;
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return bad_config;
    } catch (const propagator::tolerance_error& e) {
        std::cerr << "abort: " << e.what() << '\n';
        return tolerance;
    } catch (const dissipative::trajectory_error& e) {
        std::cerr << "abort: " << e.what() << '\n';
        return tolerance;
    } catch (const propagator::timing_error& e) {
        std::cerr << "abort: " << e.what() << '\n';
        return tolerance;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return failure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cavlink: one-step entanglement of two atomic clouds in fiber-linked cavities"};
    app.require_subcommand(1);
    Flags f;
    struct Sub {
        const char* name;
        const char* help;
        Kind kind;
    };
    const Sub subs[] = {
        {"regime", "derived constants and regime conditions", Kind::regime},
        {"ideal", "closed-form protocol", Kind::ideal},
        {"simulate", "dynamical run (scenario effective or full_open from the config)", Kind::effective},
        {"fig2", "population/coherence/fidelity curves for one case", Kind::fig2},
        {"noon", "NOON state from the symmetric target", Kind::noon},
        {"gauge-check", "gauge reduction with random wave vectors", Kind::gauge},
    };
    std::optional<Kind> chosen;
    for (const auto& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        add_common(sub, f);
        if (s.kind == Kind::fig2)
            sub->add_option("--case", f.fig2_case, "a|b|c|d")->check(CLI::IsMember({"a", "b", "c", "d"}));
        sub->callback([&chosen, k = s.kind] { chosen = k; });
    }
    CLI11_PARSE(app, argc, argv);
    return run(f, *chosen);
}
