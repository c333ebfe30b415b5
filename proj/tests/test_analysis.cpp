#include "cavlink/analysis.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cavlink;
using namespace cavlink::analysis;

namespace {

Vec random_vec(Eigen::Index n, std::mt19937_64& g) {
    std::normal_distribution<double> d;
    Vec v(n);
    for (auto& x : v) x = {d(g), d(g)};
    return v.normalized();
}

HilbertLayout tri() { return HilbertLayout({hilbert::dicke(1, "A"), hilbert::boson(2, "B"), hilbert::dicke(3, "C")}); }

// Reshape-and-sum on raw index arithmetic: psi(a, b, c) with row-major strides.
Mat oracle_keep_B(const Vec& psi) {
    Mat out = Mat::Zero(3, 3);
    for (int a = 0; a < 2; ++a)
        for (int c = 0; c < 4; ++c)
            for (int b = 0; b < 3; ++b)
                for (int b2 = 0; b2 < 3; ++b2) out(b, b2) += psi(a * 12 + b * 4 + c) * std::conj(psi(a * 12 + b2 * 4 + c));
    return out;
}

}  // namespace

TEST(PartialTrace, ProductStateKeepsFactor) {
    const HilbertLayout l({hilbert::dicke(2, "A"), hilbert::boson(1, "B")});
    std::mt19937_64 g(1);
    const Vec a = random_vec(3, g), b = random_vec(2, g);
    const auto r = partial_trace(StateVector(l, kron(a, b)), {"A"});
    EXPECT_LT(max_abs(Mat(r.matrix - a * a.adjoint())), 1e-14);
    EXPECT_EQ(r.layout.factor(0).label, "A");
}

TEST(PartialTrace, BellPairIsMaximallyMixed) {
    const HilbertLayout l({hilbert::dicke(1, "A"), hilbert::dicke(1, "B")});
    Vec v = Vec::Zero(4);
    v(0) = v(3) = 1.0 / std::sqrt(2.0);
    const StateVector psi(l, v);
    EXPECT_LT(max_abs(Mat(partial_trace(psi, {"B"}).matrix - 0.5 * Mat::Identity(2, 2))), 1e-15);
    EXPECT_LT(max_abs(Mat(partial_trace(DensityMatrix::pure(psi), {"A"}).matrix - 0.5 * Mat::Identity(2, 2))), 1e-15);
}

TEST(PartialTrace, RandomTripartiteAgainstOracle) {
    std::mt19937_64 g(5);
    const HilbertLayout l = tri();
    for (int trial = 0; trial < 5; ++trial) {
        const StateVector psi(l, random_vec(24, g));
        const Mat ref = oracle_keep_B(psi.amplitudes);
        const auto r1 = partial_trace(psi, {"B"});
        const auto r2 = partial_trace(DensityMatrix::pure(psi), {"B"});
        EXPECT_LT(max_abs(Mat(r1.matrix - ref)), 1e-12);
        EXPECT_LT(max_abs(Mat(r2.matrix - ref)), 1e-12);
        EXPECT_NEAR(r1.trace().real(), 1.0, 1e-12);
        RVec e = hermitian_eigenvalues(r1.matrix), eo = hermitian_eigenvalues(ref);
        EXPECT_LT((e - eo).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_GT(e.minCoeff(), -1e-10);
    }
}

TEST(PartialTrace, KeepOrderDefinesFactorOrder) {
    std::mt19937_64 g(8);
    const StateVector psi(tri(), random_vec(24, g));
    const auto ac = partial_trace(psi, {"A", "C"}), ca = partial_trace(psi, {"C", "A"});
    EXPECT_EQ(ca.layout.factor(0).label, "C");
    // swap permutation between (A,C) and (C,A) index orders
    Mat P = Mat::Zero(8, 8);
    for (int a = 0; a < 2; ++a)
        for (int c = 0; c < 4; ++c) P(c * 2 + a, a * 4 + c) = 1.0;
    EXPECT_LT(max_abs(Mat(P * ac.matrix * P.transpose() - ca.matrix)), 1e-14);
}

TEST(PartialTrace, Errors) {
    const StateVector psi = StateVector::basis(tri(), {0, 0, 0});
    EXPECT_THROW(partial_trace(psi, {}), std::invalid_argument);
    EXPECT_THROW(partial_trace(psi, {"A", "A"}), std::invalid_argument);
    EXPECT_THROW(partial_trace(psi, {"Z"}), std::invalid_argument);
}

TEST(Fidelity, Basics) {
    std::mt19937_64 g(2);
    const HilbertLayout l({hilbert::dicke(3, "A")});
    const StateVector psi(l, random_vec(4, g));
    EXPECT_NEAR(fidelity(DensityMatrix::pure(psi), psi), 1.0, 1e-14);
    EXPECT_NEAR(fidelity(DensityMatrix(l, Mat::Identity(4, 4) / 4.0), psi), 0.25, 1e-14);
    EXPECT_THROW(fidelity(DensityMatrix(tri(), Mat::Identity(24, 24) / 24.0), psi), std::invalid_argument);
    EXPECT_THROW(fidelity(psi, StateVector::basis(tri(), {0, 0, 0})), std::invalid_argument);
}

TEST(Fidelity, LosslessProtocolReachesTarget) {
    for (int N : {1, 2, 3}) {
        const auto init = StateVector::basis(propagator::atoms_layout(N, N), {0, 0});
        const auto out = propagator::protocol_final_state(init, pi / 2);
        EXPECT_NEAR(fidelity(DensityMatrix::pure(out), target_state(TargetKind::psi_a, N, N)), 1.0, 1e-10);
    }
}

TEST(Targets, ExplicitForms) {
    const auto a = target_state(TargetKind::psi_a, 1, 1);
    EXPECT_LT(std::abs(a.amplitudes(0) - std::exp(-I * (pi / 4)) / std::sqrt(2.0)), 1e-15);
    EXPECT_LT(std::abs(a.amplitudes(3) - std::exp(I * (pi / 4)) / std::sqrt(2.0)), 1e-15);
    for (auto [N1, N2] : {std::pair{1, 1}, {2, 3}, {5, 5}}) {
        const auto s = target_state(TargetKind::psi_s, N1, N2), t = target_state(TargetKind::psi_a, N1, N2);
        EXPECT_NEAR(s.norm(), 1.0, 1e-15);
        EXPECT_EQ(std::abs(s.amplitudes.dot(t.amplitudes)), 0.0);
    }
    EXPECT_THROW(target_state(TargetKind::psi_a, 1, 1, 0), std::invalid_argument);
}

TEST(Targets, CrossModuleConsistency) {
    for (int N : {1, 2, 4}) {
        const auto in = StateVector::basis(propagator::atoms_layout(N, N), {0, static_cast<std::size_t>(N)});
        const auto out = propagator::protocol_final_state(in, pi / 2);
        EXPECT_LT((out.amplitudes - target_state(TargetKind::psi_s, N, N).amplitudes).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Targets, FactorizedFieldTracesOut) {
    std::mt19937_64 g(4);
    const auto tgt = target_state(TargetKind::psi_s, 2, 2);
    const HilbertLayout l({hilbert::dicke(2, "cloud1"), hilbert::dicke(2, "cloud2"), hilbert::boson(3, "c")});
    const StateVector full(l, kron(tgt.amplitudes, random_vec(4, g)));
    EXPECT_NEAR(fidelity(partial_trace(full, {"cloud1", "cloud2"}), tgt), 1.0, 1e-12);
}

TEST(Observables, InitialAndFinal) {
    const auto b = branches(TargetKind::psi_a, 2, 2);
    const auto tgt = target_state(TargetKind::psi_a, 2, 2);
    const auto start = observables(DensityMatrix::pure(StateVector::basis(propagator::atoms_layout(2, 2), {0, 0})), b, tgt);
    EXPECT_EQ(start.P_ground, 1.0);
    EXPECT_EQ(start.P_excited, 0.0);
    EXPECT_EQ(start.coh_re, 0.0);
    EXPECT_EQ(start.coh_im, 0.0);
    const auto end = observables(DensityMatrix::pure(tgt), b, tgt);
    EXPECT_NEAR(end.P_ground, 0.5, 1e-15);
    EXPECT_NEAR(end.P_excited, 0.5, 1e-15);
    EXPECT_NEAR(std::hypot(end.coh_re, end.coh_im), 0.5, 1e-15);
    EXPECT_NEAR(end.fidelity, 1.0, 1e-15);
    // coherence <1..1|rho|0..0> = e^{i pi/4} e^{i pi/4} / 2
    EXPECT_NEAR(end.coh_im, 0.5, 1e-15);
    Mat dephased = DensityMatrix::pure(tgt).matrix.diagonal().asDiagonal();
    const auto mixed = observables(DensityMatrix(tgt.layout, dephased), b, tgt);
    EXPECT_NEAR(mixed.coh_re, 0.0, 1e-15);
    EXPECT_NEAR(mixed.fidelity, 0.5, 1e-15);
    EXPECT_EQ(end.row().size(), 5u);
}

TEST(Observables, CauchySchwarzOnRandomStates) {
    std::mt19937_64 g(6);
    const auto b = branches(TargetKind::psi_s, 2, 3);
    const auto tgt = target_state(TargetKind::psi_s, 2, 3);
    for (int k = 0; k < 50; ++k) {
        Mat A(12, 12);
        for (Eigen::Index j = 0; j < 12; ++j) A.col(j) = random_vec(12, g) * (k % 3 ? 1.0 : 1e-3 * j);
        Mat rho = A * A.adjoint();
        rho /= rho.trace();
        const auto s = observables(DensityMatrix(tgt.layout, rho), b, tgt);
        EXPECT_GE(s.P_ground, 0.0);
        EXPECT_LE(s.P_excited, 1.0);
        EXPECT_LE(std::hypot(s.coh_re, s.coh_im), std::sqrt(s.P_ground * s.P_excited) + 1e-9);
        EXPECT_GE(s.fidelity, 0.0);
        EXPECT_LE(s.fidelity, 1.0 + 1e-9);
    }
}

TEST(DrivingFrame, UnitaryRotationPreservesSpectrum) {
    std::mt19937_64 g(12);
    const HilbertLayout l = propagator::atoms_layout(2, 1);
    const Vec v = random_vec(6, g);
    const DensityMatrix rho(l, v * v.adjoint());
    const auto p = model::reference_params();
    const auto r = driving_frame(rho, p, 1.3);
    EXPECT_NEAR(r.trace().real(), 1.0, 1e-13);
    EXPECT_NEAR((r.matrix * r.matrix).trace().real(), 1.0, 1e-12);
    EXPECT_LT(max_abs(Mat(driving_frame(rho, p, 0.0).matrix - rho.matrix)), 1e-15);
    // driving-block eigenvalues are integer multiples of 2|beta| = 2, so t = pi is a full period
    EXPECT_LT(max_abs(Mat(driving_frame(rho, p, pi).matrix - rho.matrix)), 1e-12);
}
