// propagator.hpp: coherent dynamics (RK4 integration, closed-form Magnus propagator),
// ideal entangling gate, protocol timing and the idealized NOON permutation

#pragma once

#include "cavlink/model.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace cavlink::propagator {

using hilbert::DensityMatrix;
using hilbert::HilbertLayout;
using hilbert::StateVector;

// Raised when a numerical validity monitor trips (norm drift, Fock cutoff, jump probability...).
class tolerance_error : public std::runtime_error {
public:
    tolerance_error(std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(std::move(module)) {}
    const std::string& module() const { return module_; }

private:
    std::string module_;
};

// ---------------------------------------------------------------- Fock cutoff monitor

struct TopOccupation {
    std::string label;
    double value = 0.0;
};

// Largest population of the top Fock level over all boson factors.
template <class Weights>
TopOccupation top_fock_occupation_from(const HilbertLayout& l, const Weights& weight) {
    TopOccupation worst;
    for (std::size_t s = 0; s < l.size(); ++s) {
        if (l.factor(s).kind != hilbert::FactorKind::boson) continue;
        const std::size_t d = l.dim(s), stride = l.stride(s), block = d * stride;
        double pop = 0.0;
        for (std::size_t base = (d - 1) * stride; base < l.total_dim(); base += block)
            for (std::size_t k = 0; k < stride; ++k) pop += weight(base + k);
        if (pop >= worst.value) worst = {l.factor(s).label, pop};
    }
    return worst;
}

inline TopOccupation top_fock_occupation(const HilbertLayout& l, const Vec& psi) {
    const double n2 = psi.squaredNorm();
    return top_fock_occupation_from(l, [&](std::size_t i) { return std::norm(psi(static_cast<Eigen::Index>(i))) / n2; });
}

inline TopOccupation top_fock_occupation(const HilbertLayout& l, const Mat& rho) {
    const double tr = rho.trace().real();
    return top_fock_occupation_from(l, [&](std::size_t i) {
        const auto k = static_cast<Eigen::Index>(i);
        return rho(k, k).real() / tr;
    });
}

// ---------------------------------------------------------------- time grid

struct TimeGrid {
    double t0 = 0.0;
    double dt = 0.0;
    std::size_t steps = 0;
    std::size_t steps_per_sample = 0;
    std::size_t samples = 0;  // including t0 and t1

    double time(std::size_t step) const { return t0 + dt * static_cast<double>(step); }
};

// Default step: dt <= 2 pi / (50 w_max), w_max the largest rate of the operator.
inline double default_step(const TimeDependentOperator& h) {
    const double w = h.max_rate();
    return w > 0.0 ? 2.0 * pi / (50.0 * w) : 1.0;
}

// RK4 loses about (w dt)^6 / 144 of norm per step on a mode of frequency w. Over `span` this
// stays below drift_budget when dt^5 <= 144 budget / (w^6 span); a factor 4 is kept in reserve.
inline double default_step(const TimeDependentOperator& h, double span, double drift_budget) {
    const double base = default_step(h), w = h.max_rate();
    if (!(w > 0.0) || !(span > 0.0)) return base;
    const double dt = std::pow(36.0 * drift_budget / (std::pow(w, 6) * span), 0.2);
    return std::min(base, dt);
}

inline TimeGrid make_grid(double t0, double t1, double dt_max, std::size_t samples) {
    if (!(dt_max > 0.0)) throw std::invalid_argument("time grid: dt must be > 0");
    if (!(t1 >= t0)) throw std::invalid_argument("time grid: t1 must be >= t0");
    if (samples < 2) samples = 2;
    TimeGrid g;
    g.t0 = t0;
    g.samples = samples;
    const double span = (t1 - t0) / static_cast<double>(samples - 1);
    g.steps_per_sample = span > 0.0 ? static_cast<std::size_t>(std::ceil(span / dt_max - 1e-12)) : 0;
    g.steps = g.steps_per_sample * (samples - 1);
    g.dt = g.steps > 0 ? (t1 - t0) / static_cast<double>(g.steps) : 0.0;
    return g;
}

// ---------------------------------------------------------------- Schrodinger integration

struct EvolveOptions {
    double dt = 0.0;                     // 0: default_step
    std::size_t samples = 2;             // observer calls, evenly spaced incl. endpoints
    double norm_tolerance = 1e-6;
    double top_fock_tolerance = 1e-4;
    bool monitor_cutoff = true;
    std::function<void(double, const Vec&)> observer;  // sees the (unnormalized) state
};

struct EvolveResult {
    StateVector state;
    double norm_drift = 0.0;
    TopOccupation max_top_fock;
    std::size_t steps = 0;
    double dt = 0.0;
};

namespace detail {
inline void rk4_step(const TimeDependentOperator& h, double t, double dt, Vec& psi, Vec& k1, Vec& k2, Vec& k3,
                     Vec& k4, Vec& tmp) {
    // dpsi/dt = -i H(t) psi
    h.apply(t, psi, k1);
    k1 *= -I;
    tmp = psi + (0.5 * dt) * k1;
    h.apply(t + 0.5 * dt, tmp, k2);
    k2 *= -I;
    tmp = psi + (0.5 * dt) * k2;
    h.apply(t + 0.5 * dt, tmp, k3);
    k3 *= -I;
    tmp = psi + dt * k3;
    h.apply(t + dt, tmp, k4);
    k4 *= -I;
    psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}
}  // namespace detail

inline EvolveResult evolve_schrodinger(const TimeDependentOperator& h, const StateVector& psi0, double t0,
                                       double t1, const EvolveOptions& opt = {}) {
    if (!(h.layout() == psi0.layout)) throw std::invalid_argument("evolve_schrodinger: layout mismatch");
    if (opt.dt < 0.0) throw std::invalid_argument("evolve_schrodinger: dt must be > 0");
    if (std::abs(psi0.norm() - 1.0) > 1e-9) throw std::invalid_argument("evolve_schrodinger: psi0 not normalized");
    const TimeGrid grid =
        make_grid(t0, t1, opt.dt > 0.0 ? opt.dt : default_step(h, t1 - t0, opt.norm_tolerance), opt.samples);
    const HilbertLayout& l = psi0.layout;

    Vec psi = psi0.amplitudes, k1, k2, k3, k4, tmp;
    EvolveResult res;
    res.dt = grid.dt;
    res.steps = grid.steps;
    auto check = [&](double t) {
        const double drift = std::abs(psi.norm() - 1.0);
        res.norm_drift = std::max(res.norm_drift, drift);
        if (drift > opt.norm_tolerance) {
            std::ostringstream os;
            os << "norm drift " << drift << " exceeds " << opt.norm_tolerance << " at t=" << t << " (dt=" << grid.dt
               << "); reduce the step";
            throw tolerance_error("propagator", os.str());
        }
        if (opt.monitor_cutoff) {
            const TopOccupation top = top_fock_occupation(l, psi);
            if (top.value > res.max_top_fock.value) res.max_top_fock = top;
            if (top.value > opt.top_fock_tolerance) {
                std::ostringstream os;
                os << "top Fock occupation " << top.value << " of mode '" << top.label << "' exceeds "
                   << opt.top_fock_tolerance << " at t=" << t << "; raise the cutoff";
                throw tolerance_error("propagator", os.str());
            }
        }
    };
    check(t0);
    if (opt.observer) opt.observer(t0, psi);
    for (std::size_t step = 0; step < grid.steps; ++step) {
        detail::rk4_step(h, grid.time(step), grid.dt, psi, k1, k2, k3, k4, tmp);
        if ((step + 1) % grid.steps_per_sample == 0 || (step & 7u) == 7u) check(grid.time(step + 1));
        if (opt.observer && (step + 1) % grid.steps_per_sample == 0) opt.observer(grid.time(step + 1), psi);
    }
    check(t1);
    res.state = StateVector::normalized(l, psi);
    return res;
}

// ---------------------------------------------------------------- closed-form Magnus propagator

struct MagnusParams {
    double gamma_t;
    cplx alpha_t;
};

inline MagnusParams magnus_params(double t, const model::DerivedConstants& d, double delta) {
    if (delta == 0.0) throw std::domain_error("magnus_params: delta = 0");
    const double x = delta * t;
    MagnusParams m{};
    m.gamma_t = -(d.Theta * d.Theta / (4.0 * delta * delta)) * (x - std::sin(x));
    m.alpha_t = (d.Theta / (2.0 * delta)) * (1.0 - std::exp(I * x)) * std::exp(I * d.theta0);
    return m;
}

// Probability mass of a coherent state |z> above Fock level n_max.
inline double coherent_tail(double abs_z, int n_max) {
    const double mean = abs_z * abs_z;
    double term = std::exp(-mean), inside = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        inside += term;
        term *= mean / (n + 1);
    }
    return std::max(0.0, 1.0 - inside);
}

// Displacement exp(z c^dag - z* c) built from the truncated generator (exactly unitary).
inline Mat truncated_displacement(cplx z, int n_max) {
    const auto ops = hilbert::boson_ops(n_max);
    const Mat G = z * Mat(ops.a_dag) - std::conj(z) * Mat(ops.a);
    return expm_hermitian(I * G, 1.0);  // exp(-i (iG)) = exp(G)
}

struct AnalyticPropagator {
    HilbertLayout layout;
    Mat U;
};

inline AnalyticPropagator analytic_u(double t, const model::ModelParams& p, const HilbertLayout& l,
                                     double tail_tolerance = 1e-8) {
    using hilbert::FactorKind;
    if (l.size() != 3 || l.factor(0).kind != FactorKind::dicke || l.factor(1).kind != FactorKind::dicke ||
        l.factor(2).kind != FactorKind::boson)
        throw std::invalid_argument("analytic_u: layout must be dicke x dicke x boson(c)");
    const int N1 = l.factor(0).size, N2 = l.factor(1).size, nc = l.factor(2).size;
    const auto d = model::derived_constants(p);
    const MagnusParams mp = magnus_params(t, d, p.delta);
    const auto x1 = hilbert::x_basis(N1), x2 = hilbert::x_basis(N2);
    const double s_max = x1.eigenvalues.cwiseAbs().maxCoeff() + x2.eigenvalues.cwiseAbs().maxCoeff();
    const double tail = coherent_tail(std::abs(mp.alpha_t) * s_max, nc);
    if (tail > tail_tolerance) {
        std::ostringstream os;
        os << "cutoff n_max=" << nc << " too small: displaced-state tail " << tail << " exceeds " << tail_tolerance;
        throw tolerance_error("propagator", os.str());
    }
    const Eigen::Index d1 = N1 + 1, d2 = N2 + 1, db = nc + 1;
    Mat block = Mat::Zero(d1 * d2 * db, d1 * d2 * db);
    std::map<long, Mat> cache;
    for (Eigen::Index i = 0; i < d1; ++i)
        for (Eigen::Index j = 0; j < d2; ++j) {
            const double s = x1.eigenvalues(i) - x2.eigenvalues(j);
            const long key = std::lround(s);
            auto it = cache.find(key);
            if (it == cache.end())
                it = cache.emplace(key, std::exp(-I * (mp.gamma_t * s * s)) *
                                            truncated_displacement(mp.alpha_t * s, nc)).first;
            const Eigen::Index off = (i * d2 + j) * db;
            block.block(off, off, db, db) = it->second;
        }
    const Mat W = kron(kron(x1.vectors, x2.vectors), Mat::Identity(db, db));
    return {l, W * block * W.adjoint()};
}

// exp(-i lt (M1_x - M2_x)^2) on dicke(N1) x dicke(N2).
inline Mat ideal_gate(int N1, int N2, double lambda_tau) {
    const auto x1 = hilbert::x_basis(N1), x2 = hilbert::x_basis(N2);
    const Eigen::Index d1 = N1 + 1, d2 = N2 + 1;
    Vec phases(d1 * d2);
    for (Eigen::Index i = 0; i < d1; ++i)
        for (Eigen::Index j = 0; j < d2; ++j) {
            const double k = 0.5 * (x1.eigenvalues(i) - x2.eigenvalues(j));
            phases(i * d2 + j) = std::exp(-I * (lambda_tau * k * k));
        }
    const Mat W = kron(x1.vectors, x2.vectors);
    return W * phases.asDiagonal() * W.adjoint();
}

inline HilbertLayout atoms_layout(int N1, int N2) {
    return HilbertLayout({hilbert::dicke(N1, "cloud1"), hilbert::dicke(N2, "cloud2")});
}

// Expands a z-basis product state over the x basis, applies the gate phases and maps back.
inline StateVector protocol_final_state(const StateVector& init, double lambda_tau) {
    using hilbert::FactorKind;
    const HilbertLayout& l = init.layout;
    if (l.size() != 2 || l.factor(0).kind != FactorKind::dicke || l.factor(1).kind != FactorKind::dicke)
        throw std::invalid_argument("protocol_final_state: layout must be dicke x dicke");
    Eigen::Index which = -1;
    for (Eigen::Index i = 0; i < init.amplitudes.size(); ++i) {
        if (std::abs(init.amplitudes(i)) > 1e-12) {
            if (which >= 0)
                throw std::invalid_argument("protocol_final_state: input is not a z-basis product state");
            which = i;
        }
    }
    if (which < 0 || std::abs(std::abs(init.amplitudes(which)) - 1.0) > 1e-9)
        throw std::invalid_argument("protocol_final_state: input is not a normalized z-basis product state");
    const auto m = l.multi_index(static_cast<std::size_t>(which));
    const int N1 = l.factor(0).size, N2 = l.factor(1).size;
    const auto x1 = hilbert::x_basis(N1), x2 = hilbert::x_basis(N2);
    const Eigen::Index d1 = N1 + 1, d2 = N2 + 1;
    Vec out = Vec::Zero(d1 * d2);
    for (Eigen::Index a = 0; a < d1; ++a)
        for (Eigen::Index b = 0; b < d2; ++b) {
            const double k = 0.5 * (x1.eigenvalues(a) - x2.eigenvalues(b));
            const cplx amp = x1.coeff(static_cast<std::size_t>(a), m[0]) *
                             x2.coeff(static_cast<std::size_t>(b), m[1]) * std::exp(-I * (lambda_tau * k * k));
            out += amp * kron(Vec(x1.vectors.col(a)), Vec(x2.vectors.col(b)));
        }
    out *= init.amplitudes(which);
    return StateVector::normalized(l, out);
}

// ---------------------------------------------------------------- protocol timing

enum class GateConvention {
    half_eigenvalue,  // phase lt (M1-M2)^2, the ideal-gate convention
    full_eigenvalue,  // phase lt (S1_x - S2_x)^2 = 4 lt (M1-M2)^2, realized by h_eff dynamics
};

struct TimingOptions {
    GateConvention convention = GateConvention::half_eigenvalue;
    int K_max = 64;
    double tolerance = pi / 8.0;
};

struct ProtocolTiming {
    double tau = 0.0;
    int K = 0;
    double lambda_tau = 0.0;      // realized lambda*tau in the chosen convention (signed)
    double phase_mismatch = 0.0;  // | |lambda_tau| - pi/2 |
    GateConvention convention = GateConvention::half_eigenvalue;
};

class timing_error : public std::runtime_error {
public:
    timing_error(const std::string& what, ProtocolTiming best) : std::runtime_error(what), best_(best) {}
    const ProtocolTiming& best() const { return best_; }

private:
    ProtocolTiming best_;
};

inline double gate_scale(GateConvention c) { return c == GateConvention::full_eigenvalue ? 4.0 : 1.0; }

inline ProtocolTiming timing_for_K(const model::ModelParams& p, int K, GateConvention c) {
    const auto d = model::derived_constants(p);
    ProtocolTiming t;
    t.K = K;
    t.convention = c;
    t.tau = 2.0 * pi * K / std::abs(p.delta);
    t.lambda_tau = gate_scale(c) * d.lambda * t.tau;
    t.phase_mismatch = std::abs(std::abs(t.lambda_tau) - pi / 2.0);
    return t;
}

inline ProtocolTiming choose_protocol_time(const model::ModelParams& p, const TimingOptions& opt = {}) {
    const auto d = model::derived_constants(p);
    if (d.lambda == 0.0) throw std::domain_error("choose_protocol_time: lambda = 0");
    ProtocolTiming best = timing_for_K(p, 1, opt.convention);
    for (int K = 2; K <= opt.K_max; ++K) {
        const ProtocolTiming c = timing_for_K(p, K, opt.convention);
        if (c.phase_mismatch < best.phase_mismatch - 1e-12) best = c;
    }
    if (best.phase_mismatch >= opt.tolerance) {
        std::ostringstream os;
        os << "choose_protocol_time: no K <= " << opt.K_max << " reaches |lambda tau| = pi/2 within "
           << opt.tolerance << "; best K=" << best.K << " gives lambda tau=" << best.lambda_tau
           << " (mismatch " << best.phase_mismatch << ")";
        throw timing_error(os.str(), best);
    }
    return best;
}

// ---------------------------------------------------------------- NOON map

// Per cavity j: |J,-J>_j |0>_j <-> |J,+J>_j |N_j>_j, identity elsewhere.
inline StateVector noon_map(const StateVector& state) {
    const HilbertLayout& l = state.layout;
    struct Pair {
        std::size_t cloud, mode;
        std::size_t top;
    };
    std::vector<Pair> pairs;
    for (int j = 1; j <= 2; ++j) {
        const std::size_t sc = l.slot("cloud" + std::to_string(j)), sm = l.slot("a" + std::to_string(j));
        if (l.factor(sc).kind != hilbert::FactorKind::dicke || l.factor(sm).kind != hilbert::FactorKind::boson)
            throw std::invalid_argument("noon_map: layout needs dicke cloud and boson mode per cavity");
        const int N = l.factor(sc).size;
        if (l.factor(sm).size < N)
            throw std::invalid_argument("noon_map: cutoff of a" + std::to_string(j) + " below N" + std::to_string(j));
        pairs.push_back({sc, sm, static_cast<std::size_t>(N)});
    }
    Vec out = Vec::Zero(state.amplitudes.size());
    for (std::size_t i = 0; i < l.total_dim(); ++i) {
        auto m = l.multi_index(i);
        for (const auto& p : pairs) {
            if (m[p.cloud] == 0 && m[p.mode] == 0) {
                m[p.cloud] = p.top;
                m[p.mode] = p.top;
            } else if (m[p.cloud] == p.top && m[p.mode] == p.top) {
                m[p.cloud] = 0;
                m[p.mode] = 0;
            }
        }
        out(static_cast<Eigen::Index>(l.index(m))) = state.amplitudes(static_cast<Eigen::Index>(i));
    }
    return {l, out};
}

}  // namespace cavlink::propagator
