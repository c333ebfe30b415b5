// model.hpp: physical parameters, derived constants, regime diagnostics and Hamiltonian builders
//
// Units: |g0| = 1 and time in 1/|g0| unless the caller chooses otherwise.
// Factor labels used by the layout helpers:
//   cloud1, cloud2        Dicke factors
//   a1, a2, b             cavity modes and fiber mode
//   c, c1, c2             normal modes (c is fiber-dark)
//   atom<j>_<n>           single three-level atom n of cloud j (full model)
//   q<j>_<n>              single two-level atom n of cloud j (gauge diagnostic)

#pragma once

#include "cavlink/td_operator.hpp"

#include <array>
#include <limits>
#include <string>

namespace cavlink::model {

using hilbert::HilbertLayout;
using hilbert::SparseOperator;

struct ModelParams {
    cplx g0{1.0, 0.0};
    cplx Omega0{1.0, 0.0};
    cplx Omega1{10.0, 0.0};
    cplx Omega2{10.0, 0.0};
    cplx Omega3{0.0, 0.0};
    double Delta0 = 100.0;
    double Delta1 = -100.0;
    double Delta3 = 200.0;
    double delta = 0.01;
    double nu = 0.1;
    double phi = 0.0;
    double kappa_c = 0.0;
    double kappa_f = 0.0;
    double gamma_e = 0.0;
    int N1 = 1;
    int N2 = 1;
    int n_max = 8;
    int n_max_fiber = 0;  // 0: same as n_max

    // Cavity-mode detuning; derived, never set independently.
    double Delta2() const { return Delta0 - delta; }
    int fiber_cutoff() const { return n_max_fiber > 0 ? n_max_fiber : n_max; }

    void validate() const {
        auto require = [](bool ok, const char* what) {
            if (!ok) throw std::invalid_argument(std::string("ModelParams: ") + what);
        };
        require(kappa_c >= 0.0, "kappa_c must be >= 0");
        require(kappa_f >= 0.0, "kappa_f must be >= 0");
        require(gamma_e >= 0.0, "gamma_e must be >= 0");
        require(N1 >= 1, "N1 must be >= 1");
        require(N2 >= 1, "N2 must be >= 1");
        require(n_max >= 1, "n_max must be >= 1");
        require(n_max_fiber >= 0, "n_max_fiber must be >= 0");
    }
};

// Simulation parameter set quoted for the numerical study (units |g0|).
// Omega3 and Delta3 are not part of that list; Omega3 = 0 adds no compensating shift.
inline ModelParams reference_params() { return ModelParams{}; }

struct DerivedConstants {
    cplx beta;
    cplx Lambda;
    double Theta;
    double theta0;
    double lambda;
    double Gamma_c;
    double Gamma_e;
    double Gamma_f;
};

inline DerivedConstants derived_constants(const ModelParams& p) {
    auto nonzero = [](double v, const char* name) {
        if (v == 0.0) throw std::domain_error(std::string("derived_constants: division by zero, ") + name + " = 0");
    };
    nonzero(p.Delta0, "Delta0");
    nonzero(p.Delta1, "Delta1");
    nonzero(p.delta, "delta");
    DerivedConstants d{};
    d.beta = -p.Omega1 * std::conj(p.Omega2) / p.Delta1;
    d.Lambda = -p.Omega0 * std::conj(p.g0) / p.Delta0;
    const cplx theta = std::sqrt(2.0) * d.Lambda / 2.0;
    d.Theta = std::abs(theta);
    d.theta0 = d.Theta > 0.0 ? std::arg(theta) : 0.0;
    d.lambda = -d.Theta * d.Theta / (4.0 * p.delta);
    const double og2 = std::norm(p.Omega0 * p.g0);
    d.Gamma_c = p.kappa_c * og2 / (8.0 * p.delta * p.delta * p.Delta0 * p.Delta0);
    d.Gamma_e = p.gamma_e * std::norm(p.Omega1) / (p.Delta1 * p.Delta1);
    const double dn = p.Delta0 * p.nu;
    d.Gamma_f = dn == 0.0 ? std::numeric_limits<double>::infinity() : p.kappa_f * og2 / (dn * dn);
    return d;
}

// ---------------------------------------------------------------- regime diagnostics

struct RegimeThresholds {
    double much_greater = 10.0;  // "a >> b" passes when a/b >= much_greater
    double similar = 2.0;        // "a ~ b" passes when max(a,b)/min(a,b) <= similar
    double stark_tolerance = 0.1;  // |differential Stark shift| <= stark_tolerance * |delta|
};

struct NamedRatio {
    std::string name;
    double value;
};

struct RegimeReport {
    std::vector<NamedRatio> condition_i;    // each detuning scale over the largest coupling
    double condition_i_min = 0.0;
    std::vector<NamedRatio> condition_ii;   // |Omega2|/|g0|, |Omega3|/|g0|
    double condition_ii_min = 0.0;
    std::vector<NamedRatio> condition_iii;  // literal magnitude relations (ratio of the two sides)
    double strong_driving_ratio = 0.0;
    double mode_separation_ratio = 0.0;
    double stark_shift_level0 = 0.0;
    double stark_shift_level1 = 0.0;
    double stark_differential = 0.0;
    RegimeThresholds thresholds;
    bool pass_i = false;
    bool pass_ii = false;
    bool pass_iii_literal = false;
    bool pass_iii_stark = false;
    bool pass_strong_driving = false;
    bool pass_mode_separation = false;

    bool all_pass() const {
        return pass_i && pass_ii && pass_iii_literal && pass_iii_stark && pass_strong_driving && pass_mode_separation;
    }
};

namespace detail {
inline double safe_ratio(double num, double den) {
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / den;
}
inline bool similar(double a, double b, double factor) {
    if (a == 0.0 && b == 0.0) return true;
    if (a == 0.0 || b == 0.0) return false;
    return std::max(a, b) / std::min(a, b) <= factor;
}
}  // namespace detail

inline RegimeReport regime_report(const ModelParams& p, const RegimeThresholds& th = {}) {
    RegimeReport r;
    r.thresholds = th;
    const double O0 = std::abs(p.Omega0), O1 = std::abs(p.Omega1), O2 = std::abs(p.Omega2),
                 O3 = std::abs(p.Omega3), g = std::abs(p.g0);

    const std::array<std::pair<const char*, double>, 7> scales{{
        {"|Delta0|", std::abs(p.Delta0)},
        {"|Delta1|", std::abs(p.Delta1)},
        {"|Delta2|", std::abs(p.Delta2())},
        {"|Delta3|", std::abs(p.Delta3)},
        {"|Delta0-Delta1|", std::abs(p.Delta0 - p.Delta1)},
        {"|Delta1-Delta2|", std::abs(p.Delta1 - p.Delta2())},
        {"|Delta2-Delta3|", std::abs(p.Delta2() - p.Delta3)},
    }};
    const std::array<std::pair<const char*, double>, 5> couplings{{
        {"|Omega0|", O0}, {"|Omega1|", O1}, {"|Omega2|", O2}, {"|g0|", g}, {"|delta|", std::abs(p.delta)},
    }};
    r.condition_i_min = std::numeric_limits<double>::infinity();
    for (const auto& [sn, sv] : scales)
        for (const auto& [cn, cv] : couplings) {
            const double v = detail::safe_ratio(sv, cv);
            r.condition_i.push_back({std::string(sn) + "/" + cn, v});
            r.condition_i_min = std::min(r.condition_i_min, v);
        }

    r.condition_ii = {{"|Omega2|/|g0|", detail::safe_ratio(O2, g)}, {"|Omega3|/|g0|", detail::safe_ratio(O3, g)}};
    r.condition_ii_min = std::min(r.condition_ii[0].value, r.condition_ii[1].value);

    const double s0 = O0 * O0 / std::abs(p.Delta0), s1 = O1 * O1 / std::abs(p.Delta1);
    const double s2 = O2 * O2 / std::abs(p.Delta1), s3 = p.Delta3 == 0.0 ? 0.0 : O3 * O3 / std::abs(p.Delta3);
    r.condition_iii = {{"(|Omega0|^2/|Delta0|)/(|Omega1|^2/|Delta1|)", detail::safe_ratio(s0, s1)},
                       {"(|Omega2|^2/|Delta1|)/(|Omega3|^2/|Delta3|)", detail::safe_ratio(s2, s3)}};

    const DerivedConstants d = derived_constants(p);
    const double beta = std::abs(d.beta), Lam = std::abs(d.Lambda);
    r.strong_driving_ratio = detail::safe_ratio(beta, std::max({std::abs(p.delta), Lam, std::abs(p.nu)}));
    r.mode_separation_ratio = detail::safe_ratio(std::abs(p.nu), std::max(std::abs(p.delta), Lam));

    r.stark_shift_level0 = std::norm(p.Omega0) / p.Delta0 + std::norm(p.Omega1) / p.Delta1;
    r.stark_shift_level1 = std::norm(p.Omega2) / p.Delta1 + (p.Delta3 == 0.0 ? 0.0 : std::norm(p.Omega3) / p.Delta3);
    r.stark_differential = r.stark_shift_level0 - r.stark_shift_level1;

    r.pass_i = r.condition_i_min >= th.much_greater;
    r.pass_ii = r.condition_ii_min >= th.much_greater;
    r.pass_iii_literal = detail::similar(s0, s1, th.similar) && detail::similar(s2, s3, th.similar);
    r.pass_iii_stark = std::abs(r.stark_differential) <= th.stark_tolerance * std::abs(p.delta);
    r.pass_strong_driving = r.strong_driving_ratio >= th.much_greater;
    r.pass_mode_separation = r.mode_separation_ratio >= th.much_greater;
    return r;
}

// ---------------------------------------------------------------- layouts

inline HilbertLayout raman_layout(const ModelParams& p, bool with_fiber) {
    std::vector<hilbert::Factor> f{hilbert::dicke(p.N1, "cloud1"), hilbert::dicke(p.N2, "cloud2"),
                                   hilbert::boson(p.n_max, "a1"), hilbert::boson(p.n_max, "a2")};
    if (with_fiber) f.push_back(hilbert::boson(p.fiber_cutoff(), "b"));
    return HilbertLayout(std::move(f));
}

// c carries the cavity cutoff n_max; c1, c2 use the fiber cutoff.
inline HilbertLayout normal_mode_layout(const ModelParams& p) {
    return HilbertLayout({hilbert::dicke(p.N1, "cloud1"), hilbert::dicke(p.N2, "cloud2"),
                          hilbert::boson(p.n_max, "c"), hilbert::boson(p.fiber_cutoff(), "c1"),
                          hilbert::boson(p.fiber_cutoff(), "c2")});
}

inline HilbertLayout effective_layout(const ModelParams& p) {
    return HilbertLayout({hilbert::dicke(p.N1, "cloud1"), hilbert::dicke(p.N2, "cloud2"),
                          hilbert::boson(p.n_max, "c")});
}

inline std::string atom_label(int cloud, int n) { return "atom" + std::to_string(cloud) + "_" + std::to_string(n); }

inline HilbertLayout full_layout(const ModelParams& p) {
    if (p.N1 > 2 || p.N2 > 2) throw std::invalid_argument("full_layout: at most 2 atoms per cloud");
    std::vector<hilbert::Factor> f;
    for (int n = 1; n <= p.N1; ++n) f.push_back(hilbert::level3(atom_label(1, n)));
    for (int n = 1; n <= p.N2; ++n) f.push_back(hilbert::level3(atom_label(2, n)));
    f.push_back(hilbert::boson(p.n_max, "a1"));
    f.push_back(hilbert::boson(p.n_max, "a2"));
    return HilbertLayout(std::move(f));
}

namespace detail {
inline void require_factor(const HilbertLayout& l, const std::string& label, hilbert::FactorKind kind,
                           const char* who) {
    auto s = l.find(label);
    if (!s || l.factor(*s).kind != kind)
        throw std::invalid_argument(std::string(who) + ": layout mismatch, needs factor '" + label + "'");
}
inline SpMat op_on(const SpMat& op, const std::string& label, const HilbertLayout& l) {
    return hilbert::embed(op, label, l).matrix;
}
}  // namespace detail

// ---------------------------------------------------------------- Hamiltonians

// Three-level atom-field interaction, per-atom factors for both clouds plus a1, a2.
inline TimeDependentOperator full_source(const ModelParams& p, const HilbertLayout& l) {
    using hilbert::FactorKind;
    detail::require_factor(l, "a1", FactorKind::boson, "h_full");
    detail::require_factor(l, "a2", FactorKind::boson, "h_full");
    TimeDependentOperator h(l);
    const SpMat e0 = hilbert::level3_projector(2, 0), e1 = hilbert::level3_projector(2, 1);
    bool any_atom = false;
    for (int j = 1; j <= 2; ++j) {
        const std::string mode = j == 1 ? "a1" : "a2";
        const SpMat a = detail::op_on(hilbert::boson_ops(l.factor(l.slot(mode)).size).a, mode, l);
        for (int n = 1;; ++n) {
            const std::string lab = atom_label(j, n);
            if (!l.has(lab)) break;
            detail::require_factor(l, lab, FactorKind::level3, "h_full");
            any_atom = true;
            const SpMat E0 = detail::op_on(e0, lab, l), E1 = detail::op_on(e1, lab, l);
            h.add_hermitian_pair(p.Omega0, p.Delta0, E0);
            h.add_hermitian_pair(p.Omega1, p.Delta1, E0);
            h.add_hermitian_pair(p.Omega2, p.Delta1, E1);
            h.add_hermitian_pair(p.Omega3, p.Delta3, E1);
            h.add_hermitian_pair(p.g0, p.Delta2(), SpMat(a * E1));
        }
    }
    if (!any_atom) throw std::invalid_argument("h_full: layout mismatch, no three-level atom factors");
    return h;
}

inline SparseOperator h_full(double t, const ModelParams& p, const HilbertLayout& l) { return full_source(p, l).at(t); }

// Collective Raman form: sum_j [beta S+_j + Lambda a_j^dag e^{i delta t} S+_j + h.c.]
inline TimeDependentOperator raman_source(const ModelParams& p, const HilbertLayout& l) {
    using hilbert::FactorKind;
    for (const char* lab : {"cloud1", "cloud2"}) detail::require_factor(l, lab, FactorKind::dicke, "h_raman");
    for (const char* lab : {"a1", "a2"}) detail::require_factor(l, lab, FactorKind::boson, "h_raman");
    const DerivedConstants d = derived_constants(p);
    TimeDependentOperator h(l);
    for (int j = 1; j <= 2; ++j) {
        const std::string cloud = "cloud" + std::to_string(j), mode = "a" + std::to_string(j);
        const SpMat Sp = detail::op_on(hilbert::dicke_ops(l.factor(l.slot(cloud)).size).S_plus, cloud, l);
        const SpMat ad = detail::op_on(hilbert::boson_ops(l.factor(l.slot(mode)).size).a_dag, mode, l);
        h.add_hermitian_pair(d.beta, 0.0, Sp);
        h.add_hermitian_pair(d.Lambda, p.delta, SpMat(ad * Sp));
    }
    return h;
}

inline SparseOperator h_raman(double t, const ModelParams& p, const HilbertLayout& l) {
    return raman_source(p, l).at(t);
}

// nu b (a1^dag + e^{i phi} a2^dag) + h.c.
inline SparseOperator h_cavity_fiber(const ModelParams& p, const HilbertLayout& l) {
    using hilbert::FactorKind;
    auto sb = l.find("b");
    if (!sb || l.factor(*sb).kind != FactorKind::boson)
        throw std::invalid_argument("h_cavity_fiber: missing fiber mode 'b'");
    for (const char* lab : {"a1", "a2"}) detail::require_factor(l, lab, FactorKind::boson, "h_cavity_fiber");
    const SpMat b = detail::op_on(hilbert::boson_ops(l.factor(*sb).size).a, "b", l);
    const SpMat a1d = detail::op_on(hilbert::boson_ops(l.factor(l.slot("a1")).size).a_dag, "a1", l);
    const SpMat a2d = detail::op_on(hilbert::boson_ops(l.factor(l.slot("a2")).size).a_dag, "a2", l);
    SpMat m = p.nu * SpMat(a1d * b) + p.nu * std::exp(I * p.phi) * SpMat(a2d * b);
    m = m + SpMat(m.adjoint());
    return {l, std::move(m)};
}

inline TimeDependentOperator cavity_fiber_source(const ModelParams& p, const HilbertLayout& l) {
    TimeDependentOperator h(l);
    h.add(1.0, 0.0, h_cavity_fiber(p, l));
    return h;
}

// Rows give (c, c1, c2) in terms of (a1, a2, b); diagonalizes the hopping of h_cavity_fiber
// into diag(0, sqrt2 nu, -sqrt2 nu). The fiber phase enters as e^{-i phi} on a2.
inline Eigen::Matrix3cd normal_modes(double phi) {
    const double r = 1.0 / std::sqrt(2.0);
    const cplx e = std::exp(-I * phi);
    Eigen::Matrix3cd T;
    T << r, -r * e, 0.0,
         0.5, 0.5 * e, r,
         0.5, 0.5 * e, -r;
    return T;
}

// Equations of motion in the frame rotating with sqrt2 nu (c1^dag c1 - c2^dag c2); the fiber phase
// is taken as absorbed into cloud 2 (phi = 0 form).
inline TimeDependentOperator prime_source(const ModelParams& p, const HilbertLayout& l) {
    using hilbert::FactorKind;
    for (const char* lab : {"cloud1", "cloud2"}) detail::require_factor(l, lab, FactorKind::dicke, "h_prime");
    for (const char* lab : {"c", "c1", "c2"}) detail::require_factor(l, lab, FactorKind::boson, "h_prime");
    const DerivedConstants d = derived_constants(p);
    const double w = std::sqrt(2.0) * p.nu;
    const SpMat c = detail::op_on(hilbert::boson_ops(l.factor(l.slot("c")).size).a, "c", l);
    const SpMat c1 = detail::op_on(hilbert::boson_ops(l.factor(l.slot("c1")).size).a, "c1", l);
    const SpMat c2 = detail::op_on(hilbert::boson_ops(l.factor(l.slot("c2")).size).a, "c2", l);
    TimeDependentOperator h(l);
    const cplx half = std::conj(d.Lambda) / 2.0;
    for (int j = 1; j <= 2; ++j) {
        const std::string cloud = "cloud" + std::to_string(j);
        const auto ops = hilbert::dicke_ops(l.factor(l.slot(cloud)).size);
        const SpMat Sp = detail::op_on(ops.S_plus, cloud, l), Sm = detail::op_on(ops.S_minus, cloud, l);
        const double sign = j == 1 ? 1.0 : -1.0;
        h.add_hermitian_pair(d.beta, 0.0, Sp);
        h.add_hermitian_pair(half, -w - p.delta, SpMat(c1 * Sm));
        h.add_hermitian_pair(half, w - p.delta, SpMat(c2 * Sm));
        h.add_hermitian_pair(half * (sign * std::sqrt(2.0)), -p.delta, SpMat(c * Sm));
    }
    return h;
}

inline SparseOperator h_prime(double t, const ModelParams& p, const HilbertLayout& l) {
    return prime_source(p, l).at(t);
}

// (Theta/2)(c^dag e^{i(delta t + theta0)} + h.c.)(S1_x - S2_x)
inline TimeDependentOperator effective_source(const ModelParams& p, const HilbertLayout& l) {
    using hilbert::FactorKind;
    for (const char* lab : {"cloud1", "cloud2"}) detail::require_factor(l, lab, FactorKind::dicke, "h_eff");
    detail::require_factor(l, "c", FactorKind::boson, "h_eff");
    const DerivedConstants d = derived_constants(p);
    const SpMat cd = detail::op_on(hilbert::boson_ops(l.factor(l.slot("c")).size).a_dag, "c", l);
    const SpMat A = detail::op_on(hilbert::dicke_ops(l.factor(l.slot("cloud1")).size).S_x, "cloud1", l) -
                    detail::op_on(hilbert::dicke_ops(l.factor(l.slot("cloud2")).size).S_x, "cloud2", l);
    TimeDependentOperator h(l);
    h.add_hermitian_pair(0.5 * d.Theta * std::exp(I * d.theta0), p.delta, SpMat(cd * A));
    return h;
}

inline SparseOperator h_eff(double t, const ModelParams& p, const HilbertLayout& l) {
    return effective_source(p, l).at(t);
}

// Collective driving V0 = sum_j (beta S+_j + h.c.) restricted to one cloud, dense.
inline Mat driving_block(const ModelParams& p, int atoms) {
    const auto ops = hilbert::dicke_ops(atoms);
    const cplx beta = derived_constants(p).beta;
    return Mat(beta * ops.S_plus + std::conj(beta) * ops.S_minus);
}

// ---------------------------------------------------------------- spatial-phase gauge

using Vec3 = std::array<double, 3>;

struct WaveVectors {
    Vec3 k1{0, 0, 0}, k2{0, 0, 0}, k3{0, 0, 0};
};

struct GaugeResult {
    SparseOperator H_before;
    SparseOperator H_after;
    SparseOperator U_gauge;  // H_after = U_gauge H_before U_gauge^dag
};

inline std::string qubit_label(int cloud, int n) { return "q" + std::to_string(cloud) + "_" + std::to_string(n); }

inline HilbertLayout gauge_layout(const ModelParams& p) {
    if (p.N1 > 3 || p.N2 > 3) throw std::invalid_argument("gauge_layout: at most 3 atoms per cloud");
    std::vector<hilbert::Factor> f;
    for (int n = 1; n <= p.N1; ++n) f.push_back(hilbert::dicke(1, qubit_label(1, n)));
    for (int n = 1; n <= p.N2; ++n) f.push_back(hilbert::dicke(1, qubit_label(2, n)));
    f.push_back(hilbert::boson(p.n_max, "a1"));
    f.push_back(hilbert::boson(p.n_max, "a2"));
    return HilbertLayout(std::move(f));
}

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

// positions: N1 entries for cloud 1 followed by N2 entries for cloud 2.
inline GaugeResult gauge_reduce(const ModelParams& p, const WaveVectors& k, const std::vector<Vec3>& positions,
                                const HilbertLayout& l, double t = 0.0) {
    if (positions.size() != static_cast<std::size_t>(p.N1 + p.N2))
        throw std::invalid_argument("gauge_reduce: expected " + std::to_string(p.N1 + p.N2) + " positions, got " +
                                    std::to_string(positions.size()));
    const DerivedConstants d = derived_constants(p);
    const Vec3 k12{k.k1[0] - k.k2[0], k.k1[1] - k.k2[1], k.k1[2] - k.k2[2]};
    const SpMat sp = hilbert::dicke_ops(1).S_plus;
    const auto n = static_cast<Eigen::Index>(l.total_dim());
    SpMat H(n, n);
    Vec u_diag = Vec::Ones(n);
    std::size_t idx = 0;
    for (int j = 1; j <= 2; ++j) {
        const std::string mode = j == 1 ? "a1" : "a2";
        detail::require_factor(l, mode, hilbert::FactorKind::boson, "gauge_reduce");
        const SpMat ad = detail::op_on(hilbert::boson_ops(l.factor(l.slot(mode)).size).a_dag, mode, l);
        const int count = j == 1 ? p.N1 : p.N2;
        for (int a = 1; a <= count; ++a, ++idx) {
            const std::string lab = qubit_label(j, a);
            detail::require_factor(l, lab, hilbert::FactorKind::dicke, "gauge_reduce");
            const SpMat Sp = detail::op_on(sp, lab, l);
            const double q = dot(k12, positions[idx]);
            const double q3 = dot(k.k3, positions[idx]);
            SpMat term = d.beta * std::exp(I * q) * Sp + d.Lambda * std::exp(I * (q3 + p.delta * t)) * SpMat(ad * Sp);
            H += term + SpMat(term.adjoint());
            // |0>: e^{+iq/2}, |1>: e^{-iq/2} on this atom
            const std::size_t s = l.slot(lab), stride = l.stride(s);
            for (Eigen::Index i = 0; i < n; ++i) {
                const bool up = (static_cast<std::size_t>(i) / stride) % 2 == 1;
                u_diag(i) *= std::exp(I * (up ? -0.5 * q : 0.5 * q));
            }
        }
    }
    std::vector<Triplet> ut;
    for (Eigen::Index i = 0; i < n; ++i) ut.emplace_back(i, i, u_diag(i));
    SpMat U = sparse_from_triplets(n, n, ut);
    SpMat after = U * H * SpMat(U.adjoint());
    return {SparseOperator(l, H), SparseOperator(l, after), SparseOperator(l, U)};
}

}  // namespace cavlink::model
