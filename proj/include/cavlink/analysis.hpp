// analysis.hpp: reduced states, fidelity, entangled targets and the branch observables

#pragma once

#include "cavlink/propagator.hpp"

namespace cavlink::analysis {

using hilbert::DensityMatrix;
using hilbert::HilbertLayout;
using hilbert::StateVector;

namespace detail {

struct Split {
    HilbertLayout kept;
    std::vector<std::size_t> keep_index, trace_index;  // per full index
    std::size_t kept_dim = 0, traced_dim = 0;
};

inline Split split(const HilbertLayout& l, const std::vector<std::string>& keep) {
    if (keep.empty()) throw std::invalid_argument("partial_trace: empty keep set");
    std::vector<std::size_t> kslots;
    for (const auto& lab : keep) {
        const std::size_t s = l.slot(lab);
        if (std::find(kslots.begin(), kslots.end(), s) != kslots.end())
            throw std::invalid_argument("partial_trace: label '" + lab + "' listed twice");
        kslots.push_back(s);
    }
    std::vector<hilbert::Factor> kf;
    for (auto s : kslots) kf.push_back(l.factor(s));
    Split sp{HilbertLayout(kf), {}, {}, 0, 1};
    sp.kept_dim = sp.kept.total_dim();
    std::vector<std::size_t> tslots;
    for (std::size_t s = 0; s < l.size(); ++s)
        if (std::find(kslots.begin(), kslots.end(), s) == kslots.end()) {
            tslots.push_back(s);
            sp.traced_dim *= l.dim(s);
        }
    sp.keep_index.resize(l.total_dim());
    sp.trace_index.resize(l.total_dim());
    for (std::size_t i = 0; i < l.total_dim(); ++i) {
        const auto m = l.multi_index(i);
        std::size_t k = 0, t = 0;
        for (auto s : kslots) k = k * l.dim(s) + m[s];
        for (auto s : tslots) t = t * l.dim(s) + m[s];
        sp.keep_index[i] = k;
        sp.trace_index[i] = t;
    }
    return sp;
}

}  // namespace detail

// Reduced state on the kept factors, in the order given by `keep`.
inline DensityMatrix partial_trace(const StateVector& psi, const std::vector<std::string>& keep) {
    const auto sp = detail::split(psi.layout, keep);
    Mat M = Mat::Zero(static_cast<Eigen::Index>(sp.kept_dim), static_cast<Eigen::Index>(sp.traced_dim));
    for (std::size_t i = 0; i < psi.layout.total_dim(); ++i)
        M(static_cast<Eigen::Index>(sp.keep_index[i]), static_cast<Eigen::Index>(sp.trace_index[i])) =
            psi.amplitudes(static_cast<Eigen::Index>(i));
    return {sp.kept, M * M.adjoint()};
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<std::string>& keep) {
    const auto sp = detail::split(rho.layout, keep);
    const auto n = rho.layout.total_dim();
    // group full indices by traced index, then sum the diagonal blocks
    std::vector<std::vector<std::size_t>> by_trace(sp.traced_dim);
    for (std::size_t i = 0; i < n; ++i) by_trace[sp.trace_index[i]].push_back(i);
    Mat out = Mat::Zero(static_cast<Eigen::Index>(sp.kept_dim), static_cast<Eigen::Index>(sp.kept_dim));
    for (const auto& group : by_trace)
        for (auto i : group)
            for (auto j : group)
                out(static_cast<Eigen::Index>(sp.keep_index[i]), static_cast<Eigen::Index>(sp.keep_index[j])) +=
                    rho.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return {sp.kept, out};
}

// <target| rho |target>
inline double fidelity(const DensityMatrix& rho, const StateVector& target) {
    if (rho.layout.total_dim() != target.layout.total_dim())
        throw std::invalid_argument("fidelity: dimension mismatch");
    return std::real(target.amplitudes.dot(rho.matrix * target.amplitudes));
}

inline double fidelity(const StateVector& psi, const StateVector& target) {
    if (psi.layout.total_dim() != target.layout.total_dim())
        throw std::invalid_argument("fidelity: dimension mismatch");
    return std::norm(target.amplitudes.dot(psi.amplitudes));
}

// ---------------------------------------------------------------- targets

enum class TargetKind { psi_s, psi_a };

struct Branches {
    std::vector<std::size_t> first, second;  // multi-indices on dicke x dicke
};

// psi_s: (0..0,1..1) and (1..1,0..0); psi_a: (0..0,0..0) and (1..1,1..1)
inline Branches branches(TargetKind kind, int N1, int N2) {
    const auto n1 = static_cast<std::size_t>(N1), n2 = static_cast<std::size_t>(N2);
    if (kind == TargetKind::psi_s) return {{0, n2}, {n1, 0}};
    return {{0, 0}, {n1, n2}};
}

// (e^{-i s pi/4}|first> + e^{+i s pi/4}|second>)/sqrt2 with s = phase_sign
inline StateVector target_state(TargetKind kind, int N1, int N2, int phase_sign = 1) {
    if (phase_sign != 1 && phase_sign != -1) throw std::invalid_argument("target_state: phase_sign must be +-1");
    const HilbertLayout l = propagator::atoms_layout(N1, N2);
    const Branches b = branches(kind, N1, N2);
    Vec v = Vec::Zero(static_cast<Eigen::Index>(l.total_dim()));
    const double r = 1.0 / std::sqrt(2.0), q = phase_sign * pi / 4.0;
    v(static_cast<Eigen::Index>(l.index(b.first))) = r * std::exp(-I * q);
    v(static_cast<Eigen::Index>(l.index(b.second))) = r * std::exp(I * q);
    return {l, v};
}

// NOON target (e^{-i pi/4}|N1,0> + e^{i pi/4}|0,N2>) x |1..1>|1..1> on cloud1, cloud2, a1, a2.
inline StateVector noon_target(int N1, int N2, int n_max, int phase_sign = 1) {
    const HilbertLayout l({hilbert::dicke(N1, "cloud1"), hilbert::dicke(N2, "cloud2"), hilbert::boson(n_max, "a1"),
                           hilbert::boson(n_max, "a2")});
    const auto n1 = static_cast<std::size_t>(N1), n2 = static_cast<std::size_t>(N2);
    Vec v = Vec::Zero(static_cast<Eigen::Index>(l.total_dim()));
    const double r = 1.0 / std::sqrt(2.0), q = phase_sign * pi / 4.0;
    v(static_cast<Eigen::Index>(l.index({n1, n2, n1, 0}))) = r * std::exp(-I * q);
    v(static_cast<Eigen::Index>(l.index({n1, n2, 0, n2}))) = r * std::exp(I * q);
    return {l, v};
}

// ---------------------------------------------------------------- observables

struct ObservableSample {
    double P_ground = 0.0;
    double P_excited = 0.0;
    double coh_re = 0.0;
    double coh_im = 0.0;
    double fidelity = 0.0;

    std::vector<double> row() const { return {P_ground, P_excited, coh_re, coh_im, fidelity}; }
};

// rho over dicke x dicke; coherence is <second|rho|first>.
inline ObservableSample observables(const DensityMatrix& rho, const Branches& b, const StateVector& target) {
    const HilbertLayout& l = rho.layout;
    if (l.size() != 2) throw std::invalid_argument("observables: rho must live on dicke x dicke");
    const auto g = static_cast<Eigen::Index>(l.index(b.first)), e = static_cast<Eigen::Index>(l.index(b.second));
    ObservableSample s;
    s.P_ground = rho.matrix(g, g).real();
    s.P_excited = rho.matrix(e, e).real();
    s.coh_re = rho.matrix(e, g).real();
    s.coh_im = rho.matrix(e, g).imag();
    s.fidelity = fidelity(rho, target);
    return s;
}

// Interaction-picture rotation rho -> e^{i V0 t} rho e^{-i V0 t}, V0 the collective driving on both clouds.
inline DensityMatrix driving_frame(const DensityMatrix& rho, const model::ModelParams& p, double t) {
    const HilbertLayout& l = rho.layout;
    const int N1 = l.factor(0).size, N2 = l.factor(1).size;
    const Mat U = kron(expm_hermitian(model::driving_block(p, N1), -t), expm_hermitian(model::driving_block(p, N2), -t));
    return {l, U * rho.matrix * U.adjoint()};
}

}  // namespace cavlink::analysis
