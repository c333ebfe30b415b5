#include "cavlink/dissipative.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

using namespace cavlink;
using namespace cavlink::dissipative;
using hilbert::SparseOperator;

namespace {

// One spin coupled to a detuned, damped mode: H = g (e^{i d t} a^dag S- + h.c.) + eta (a + a^dag).
struct Toy {
    HilbertLayout l{{hilbert::dicke(1, "q"), hilbert::boson(8, "a")}};
    TimeDependentOperator h{l};
    SparseOperator a = hilbert::embed(hilbert::boson_ops(8).a, "a", l);
    SparseOperator sm = hilbert::embed(hilbert::dicke_ops(1).S_minus, "q", l);

    explicit Toy(double g = 0.3, double d = 0.2, double eta = 0.0) {
        h.add_hermitian_pair(g, d, SpMat(SpMat(a.matrix.adjoint()) * sm.matrix));
        if (eta != 0.0) h.add_hermitian_pair(eta, 0.0, a);
    }
    StateVector excited() const { return StateVector::basis(l, {1, 0}); }
};

double mean_photons(const HilbertLayout& l, const Mat& rho) {
    return (hilbert::embed(hilbert::boson_ops(4).n, "a", l).matrix * rho).trace().real();
}

}  // namespace

TEST(CollapseSet, Validation) {
    Toy t;
    CollapseSet c(t.l);
    c.add(t.a, 0.0, "a");
    EXPECT_TRUE(c.empty());
    EXPECT_THROW(c.add(t.a, -0.1, "a"), std::invalid_argument);
    EXPECT_THROW(c.add(t.a, std::nan(""), "a"), std::invalid_argument);
    EXPECT_THROW(c.add(t.a, INFINITY, "a"), std::invalid_argument);
    const HilbertLayout other{{hilbert::boson(4, "a")}};
    EXPECT_THROW(c.add(hilbert::embed(hilbert::boson_ops(4).a, "a", other), 1.0, "a"), std::invalid_argument);
    c.add(t.a, 0.25, "a");
    EXPECT_EQ(c.size(), 1u);
}

TEST(Lindblad, NoCollapsesMatchesPureEvolution) {
    Toy t(0.3, 0.2, 0.05);
    const auto psi0 = t.excited();
    propagator::EvolveOptions eo;
    eo.dt = 0.01;
    const auto pure = propagator::evolve_schrodinger(t.h, psi0, 0.0, 20.0, eo);
    LindbladOptions lo;
    lo.dt = 0.01;
    const auto mixed = lindblad_evolve(DensityMatrix::pure(psi0), t.h, CollapseSet(t.l), 0.0, 20.0, lo);
    const Mat ref = pure.state.amplitudes * pure.state.amplitudes.adjoint();
    EXPECT_LT(max_abs(Mat(mixed.rho.matrix - ref)), 1e-8);
}

TEST(Lindblad, CavityDecayLaw) {
    const HilbertLayout l{{hilbert::dicke(1, "q"), hilbert::boson(4, "a")}};
    CollapseSet c(l);
    const double kappa = 0.15;
    c.add(hilbert::embed(hilbert::boson_ops(4).a, "a", l), kappa, "a");
    LindbladOptions o;
    o.samples = 11;
    o.monitor_cutoff = false;
    double worst = 0.0;
    o.observer = [&](double t, const Mat& rho) {
        worst = std::max(worst, std::abs(mean_photons(l, rho) - 3.0 * std::exp(-2 * kappa * t)));
    };
    const auto r = lindblad_evolve(DensityMatrix::pure(StateVector::basis(l, {0, 3})), TimeDependentOperator(l), c, 0.0,
                                   10.0, o);
    EXPECT_LT(worst, 1e-6);
    EXPECT_LT(r.trace_drift, 1e-10);
    EXPECT_GT(r.min_eigenvalue, -1e-10);
}

TEST(Lindblad, RejectsInvalidInitialState) {
    Toy t;
    Mat m = Mat::Zero(18, 18);
    m(0, 0) = 0.5;
    EXPECT_THROW(lindblad_evolve(DensityMatrix(t.l, m), t.h, CollapseSet(t.l), 0.0, 1.0), std::invalid_argument);
    m(0, 0) = 1.5;
    m(1, 1) = -0.5;
    EXPECT_THROW(lindblad_evolve(DensityMatrix(t.l, m), t.h, CollapseSet(t.l), 0.0, 1.0), std::invalid_argument);
}

TEST(Mcwf, ZeroRatesReduceToSchrodinger) {
    Toy t(0.3, 0.2, 0.05);
    CollapseSet c(t.l);
    c.add(t.a, 0.0, "a");
    TrajectoryOptions to;
    to.dt = 0.01;
    const auto traj = mcwf_trajectory(t.excited(), t.h, c, 0.0, 20.0, 5, to);
    propagator::EvolveOptions eo;
    eo.dt = 0.01;
    const auto pure = propagator::evolve_schrodinger(t.h, t.excited(), 0.0, 20.0, eo);
    EXPECT_TRUE(traj.jumps.empty());
    EXPECT_LT((traj.final_state.amplitudes - pure.state.amplitudes).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Mcwf, WaitingTimesAreExponential) {
    // single photon, pure decay: survival e^{-2 kappa t}
    const HilbertLayout l{{hilbert::boson(1, "a")}};
    CollapseSet c(l);
    const double kappa = 0.5;
    c.add(hilbert::embed(hilbert::boson_ops(1).a, "a", l), kappa, "a");
    TrajectoryOptions o;
    o.dt = 0.002;
    o.monitor_cutoff = false;
    const TrajectoryKernel k(TimeDependentOperator(l), c, 0.0, 12.0, o);
    std::vector<double> w;
    const std::size_t n = 400;
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = run_trajectory(k, StateVector::basis(l, {1}), trajectory_seed(11, i), o);
        ASSERT_LE(r.jumps.size(), 1u);
        if (!r.jumps.empty()) w.push_back(r.jumps[0].time);
    }
    ASSERT_GT(w.size(), n - 3);
    std::sort(w.begin(), w.end());
    double D = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double F = 1.0 - std::exp(-2 * kappa * w[i]);
        D = std::max({D, std::abs(F - double(i) / w.size()), std::abs(F - double(i + 1) / w.size())});
    }
    EXPECT_LT(D, 1.63 / std::sqrt(double(w.size())));  // alpha = 0.01
}

TEST(Mcwf, SeededJumpLogIsDeterministic) {
    Toy t(0.3, 0.2, 0.2);
    CollapseSet c(t.l);
    c.add(t.a, 0.2, "a");
    c.add(t.sm, 0.05, "q");
    auto log = [&](std::uint64_t seed) {
        std::vector<TrajectoryResult> runs{mcwf_trajectory(t.excited(), t.h, c, 0.0, 30.0, seed)};
        std::ostringstream os;
        write_jump_log(os, runs);
        return os.str();
    };
    const std::string a = log(42), b = log(42), other = log(43);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, other);
    EXPECT_EQ(a.substr(0, a.find('\n')), "trajectory,seed,time,channel,label");
    EXPECT_GT(std::count(a.begin(), a.end(), '\n'), 1);
}

TEST(Mcwf, JumpProbabilityGuard) {
    Toy t;
    CollapseSet c(t.l);
    c.add(t.a, 5.0, "a");
    TrajectoryOptions o;
    o.dt = 0.05;
    EXPECT_THROW(mcwf_trajectory(StateVector::basis(t.l, {0, 2}), t.h, c, 0.0, 5.0, 1, o), propagator::tolerance_error);
}

TEST(Seeds, DistinctAndStable) {
    std::set<std::uint64_t> s;
    for (std::uint64_t i = 0; i < 1000; ++i) s.insert(trajectory_seed(7, i));
    EXPECT_EQ(s.size(), 1000u);
    EXPECT_NE(trajectory_seed(7, 0), trajectory_seed(8, 0));
    EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFull);
    std::mt19937_64 g(1);
    for (int i = 0; i < 1000; ++i) {
        const double u = uniform01(g);
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

namespace {

EnsembleResult toy_ensemble(std::size_t n, unsigned threads) {
    static Toy t(0.3, 0.2, 0.1);
    CollapseSet c(t.l);
    c.add(t.a, 0.1, "a");
    EnsembleOptions o;
    o.n_traj = n;
    o.base_seed = 99;
    o.threads = threads;
    o.trajectory.samples = 6;
    o.trajectory.sampler = [](double, const StateVector& s) {
        return std::vector<double>{s.amplitudes.tail(9).squaredNorm()};  // spin up
    };
    return mcwf_ensemble(t.excited(), t.h, c, 0.0, 25.0, o);
}

}  // namespace

TEST(Ensemble, SingleTrajectoryHasNoStandardError) {
    const auto e = toy_ensemble(1, 1);
    EXPECT_FALSE(e.std_error_defined);
    EXPECT_TRUE(std::isnan(e.std_error.back()[0]));
    EXPECT_EQ(e.seeds[0], trajectory_seed(99, 0));
}

TEST(Ensemble, PrefixStableAndThreadIndependent) {
    const auto a = toy_ensemble(16, 1), b = toy_ensemble(32, 1), c = toy_ensemble(16, 3);
    for (std::size_t i = 0; i < 16; ++i) {
        EXPECT_EQ(a.seeds[i], b.seeds[i]);
        EXPECT_EQ(a.jump_counts[i], b.jump_counts[i]);
    }
    EXPECT_EQ(a.mean, c.mean);
    EXPECT_EQ(a.std_error, c.std_error);
    EXPECT_EQ(a.jump_counts, c.jump_counts);
    EXPECT_TRUE(a.std_error_defined);
}

TEST(Ensemble, AgreesWithLindblad) {
    Toy t(0.3, 0.2, 0.1);
    CollapseSet c(t.l);
    c.add(t.a, 0.1, "a");
    c.add(t.sm, 0.03, "q");
    EnsembleOptions o;
    o.n_traj = 400;
    o.base_seed = 3;
    o.trajectory.dt = 0.01;
    o.trajectory.samples = 6;
    o.trajectory.sampler = [&](double, const StateVector& s) {
        return std::vector<double>{s.amplitudes.tail(9).squaredNorm()};
    };
    const auto e = mcwf_ensemble(t.excited(), t.h, c, 0.0, 25.0, o);
    std::vector<double> ref;
    LindbladOptions lo;
    lo.dt = 0.01;
    lo.samples = 6;
    lo.observer = [&](double, const Mat& rho) { ref.push_back(rho.diagonal().tail(9).real().sum()); };
    lindblad_evolve(DensityMatrix::pure(t.excited()), t.h, c, 0.0, 25.0, lo);
    ASSERT_EQ(ref.size(), e.mean.size());
    for (std::size_t i = 1; i < ref.size(); ++i)
        EXPECT_LT(std::abs(e.mean[i][0] - ref[i]), 4 * e.std_error[i][0] + 1e-3) << i;
}

TEST(Ensemble, FailingTrajectoryIsIdentified) {
    Toy t;
    CollapseSet c(t.l);
    c.add(t.a, 0.1, "a");
    EnsembleOptions o;
    o.n_traj = 3;
    // starts on the top Fock level, so the first sample trips the monitor
    try {
        mcwf_ensemble(StateVector::basis(t.l, {0, 8}), t.h, c, 0.0, 1.0, o);
        FAIL();
    } catch (const trajectory_error& e) {
        EXPECT_EQ(e.index(), 0u);
    }
}
