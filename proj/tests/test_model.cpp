#include "cavlink/model.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cavlink;
using namespace cavlink::model;
using hilbert::HilbertLayout;

TEST(DerivedConstants, ReferenceSet) {
    const auto d = derived_constants(reference_params());
    // hand arithmetic: beta = -10*10/(-100), Lambda = -1*1/100, Theta = |sqrt2 Lambda/2|
    EXPECT_NEAR(std::abs(d.beta - cplx(1.0, 0.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(d.Lambda - cplx(-0.01, 0.0)), 0.0, 1e-15);
    EXPECT_NEAR(d.Theta, 0.01 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(std::abs(d.theta0), pi, 1e-15);
    EXPECT_NEAR(d.lambda, -1.25e-3, 1e-15);
}

TEST(DerivedConstants, DecayRateEstimates) {
    auto p = reference_params();
    p.kappa_c = 1.0;
    p.kappa_f = 1.0;
    p.gamma_e = 1.0;
    const auto d = derived_constants(p);
    // 1/(8 * 1e-4 * 1e4) = 0.125; 100/1e4 = 0.01; 1/(100*0.1)^2 = 0.01
    EXPECT_NEAR(d.Gamma_c, 0.125, 1e-12);
    EXPECT_NEAR(d.Gamma_e, 0.01, 1e-15);
    EXPECT_NEAR(d.Gamma_f, 0.01, 1e-15);
}

TEST(DerivedConstants, Errors) {
    auto p = reference_params();
    p.Delta0 = 0.0;
    try {
        derived_constants(p);
        FAIL();
    } catch (const std::domain_error& e) {
        EXPECT_NE(std::string(e.what()).find("Delta0"), std::string::npos);
    }
    p = reference_params();
    p.delta = 0.0;
    EXPECT_THROW(derived_constants(p), std::domain_error);
    p = reference_params();
    p.Delta1 = 0.0;
    EXPECT_THROW(derived_constants(p), std::domain_error);
    p = reference_params();
    p.nu = 0.0;
    p.kappa_f = 0.1;
    EXPECT_TRUE(std::isinf(derived_constants(p).Gamma_f));
}

TEST(Regime, ReferenceStarkShifts) {
    const auto r = regime_report(reference_params());
    EXPECT_NEAR(r.stark_shift_level0, -0.99, 1e-15);
    EXPECT_NEAR(r.stark_shift_level1, -1.0, 1e-15);
    EXPECT_NEAR(r.stark_differential, 0.01, 1e-15);
    EXPECT_FALSE(r.pass_iii_stark);  // the residual shift equals delta itself
    EXPECT_GE(r.strong_driving_ratio, 10.0);
    EXPECT_NEAR(r.mode_separation_ratio, 10.0, 1e-12);
}

TEST(Regime, CompensatingOmega3RestoresStarkBalance) {
    auto p = reference_params();
    // |Omega3|^2/Delta3 must supply level0 - |Omega2|^2/Delta1 = 0.01
    p.Omega3 = std::sqrt(0.01 * p.Delta3);
    const auto r = regime_report(p);
    EXPECT_NEAR(r.stark_differential, 0.0, 1e-12);
    EXPECT_TRUE(r.pass_iii_stark);
}

TEST(Regime, StrongDrivingFlagsWeakBeta) {
    auto p = reference_params();
    p.Omega1 = 0.1;
    EXPECT_FALSE(regime_report(p).pass_strong_driving);
}

TEST(Hamiltonians, HermitianAtRandomTimes) {
    auto p = reference_params();
    p.N1 = 2;
    p.N2 = 1;
    p.n_max = 2;
    std::mt19937_64 g(1);
    std::uniform_real_distribution<double> u(0.0, 700.0);
    const auto lr = raman_layout(p, true), ln = normal_mode_layout(p), le = effective_layout(p);
    p.N1 = 1;
    const auto lf = full_layout(p);
    for (int k = 0; k < 5; ++k) {
        const double t = u(g);
        EXPECT_LT(h_raman(t, p, raman_layout(p, false)).hermiticity_error(), 1e-12);
        EXPECT_LT(h_prime(t, p, normal_mode_layout(p)).hermiticity_error(), 1e-12);
        EXPECT_LT(h_eff(t, p, effective_layout(p)).hermiticity_error(), 1e-12);
        EXPECT_LT(h_full(t, p, lf).hermiticity_error(), 1e-12);
    }
    p.N1 = 2;
    EXPECT_LT(h_cavity_fiber(p, lr).hermiticity_error(), 1e-12);
    EXPECT_THROW(h_cavity_fiber(p, ln), std::invalid_argument);
    EXPECT_THROW(h_eff(0.0, p, lr), std::invalid_argument);
    EXPECT_THROW(h_raman(0.0, p, le), std::invalid_argument);
}

TEST(NormalModes, DiagonalizeHopping) {
    const double nu = 0.1;
    for (double phi : {0.0, 0.3, -1.2, pi}) {
        // oracle: hopping matrix in (a1, a2, b), H = x^dag M x
        Eigen::Matrix3cd M = Eigen::Matrix3cd::Zero();
        M(0, 2) = nu;
        M(1, 2) = nu * std::exp(I * phi);
        M(2, 0) = std::conj(M(0, 2));
        M(2, 1) = std::conj(M(1, 2));
        const Eigen::Matrix3cd T = normal_modes(phi);
        EXPECT_LT((T * T.adjoint() - Eigen::Matrix3cd::Identity()).cwiseAbs().maxCoeff(), 1e-15);
        // (c, c1, c2) = T (a1, a2, b) gives H = y^dag (T M T^dag) y
        const Eigen::Matrix3cd D = T * M * T.adjoint();
        Eigen::Matrix3cd expect = Eigen::Matrix3cd::Zero();
        expect(1, 1) = std::sqrt(2.0) * nu;
        expect(2, 2) = -std::sqrt(2.0) * nu;
        EXPECT_LT((D - expect).cwiseAbs().maxCoeff(), 1e-15) << phi;
        // c carries no fiber component
        EXPECT_EQ(std::abs(T(0, 2)), 0.0);
    }
}

TEST(PrimeFrame, MatchesTransformedRamanCoupling) {
    // In the a-mode frame the coupling amplitude of a_m^dag S+_j is Lambda e^{i delta t} [m == j].
    // With a_m^dag = sum_k T_km c_k^dag and c_k^dag -> c_k^dag e^{i w_k t} in the rotating frame,
    // <S+_j, 1_k| H |vac> must be Lambda e^{i (delta + w_k) t} T_kj.
    auto p = reference_params();
    p.n_max = 1;
    const HilbertLayout l = normal_mode_layout(p);
    const auto d = derived_constants(p);
    const Eigen::Matrix3cd T = normal_modes(0.0);
    const double w[3] = {0.0, std::sqrt(2.0) * p.nu, -std::sqrt(2.0) * p.nu};
    for (double t : {0.0, 13.7, 321.0}) {
        const auto H = h_prime(t, p, l);
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 3; ++k) {
                std::vector<std::size_t> m{0, 0, 0, 0, 0};
                m[static_cast<std::size_t>(j)] = 1;
                m[2 + static_cast<std::size_t>(k)] = 1;
                const cplx got = H.element(l.index(m), 0);
                const cplx expect = d.Lambda * std::exp(I * ((p.delta + w[k]) * t)) * T(k, j);
                EXPECT_NEAR(std::abs(got - expect), 0.0, 1e-15) << t << " " << j << " " << k;
            }
        // driving term untouched by the mode transformation
        EXPECT_NEAR(std::abs(H.element(l.index({1, 0, 0, 0, 0}), 0) - d.beta), 0.0, 1e-15);
    }
}

TEST(EffectiveFrame, CouplingToXEigenstates) {
    auto p = reference_params();
    p.n_max = 2;
    const HilbertLayout l = effective_layout(p);
    const auto d = derived_constants(p);
    const auto x = hilbert::x_basis(1);
    // |+x>_1 |-x>_2 has A = S1_x - S2_x = 2
    const Vec atoms = kron(Vec(x.vectors.col(1)), Vec(x.vectors.col(0)));
    Vec vac = Vec::Zero(3), one = Vec::Zero(3);
    vac(0) = 1.0;
    one(1) = 1.0;
    const double t = 42.0;
    const auto H = h_eff(t, p, l);
    const cplx amp = kron(atoms, one).dot(H.matrix * kron(atoms, vac));
    EXPECT_NEAR(std::abs(amp - 0.5 * d.Theta * std::exp(I * (p.delta * t + d.theta0)) * 2.0), 0.0, 1e-15);
}

TEST(FullModel, LayoutChecks) {
    auto p = reference_params();
    p.N1 = 3;
    EXPECT_THROW(full_layout(p), std::invalid_argument);
    p.N1 = 1;
    EXPECT_THROW(h_full(0.0, p, raman_layout(p, false)), std::invalid_argument);
    EXPECT_EQ(full_layout(p).total_dim(), 9u * 81u);
}

TEST(DrivingBlock, Eigenvalues) {
    const auto p = reference_params();
    const RVec e = hermitian_eigenvalues(driving_block(p, 3));
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(e(k), 2.0 * (-1.5 + k), 1e-12);
}

TEST(Gauge, SpectrumPreservedAndPhasesRemoved) {
    std::mt19937_64 g(9);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    auto p = reference_params();
    p.N1 = 2;
    p.N2 = 1;
    p.n_max = 1;
    const HilbertLayout l = gauge_layout(p);
    for (int trial = 0; trial < 3; ++trial) {
        WaveVectors k{{u(g), u(g), u(g)}, {u(g), u(g), u(g)}, {u(g), u(g), u(g)}};
        std::vector<Vec3> pos(3);
        for (auto& r : pos) r = {u(g), u(g), u(g)};
        const auto gr = gauge_reduce(p, k, pos, l, 3.0);
        const RVec e0 = hermitian_eigenvalues(gr.H_before.dense()), e1 = hermitian_eigenvalues(gr.H_after.dense());
        EXPECT_LT((e0 - e1).cwiseAbs().maxCoeff(), 1e-10);
        for (int i = 0; i < 3; ++i) k.k3[i] = k.k1[i] - k.k2[i];
        const auto matched = gauge_reduce(p, k, pos, l, 3.0);
        const auto plain = gauge_reduce(p, k, std::vector<Vec3>(3, Vec3{0, 0, 0}), l, 3.0);
        EXPECT_LT(max_abs(SpMat(matched.H_after.matrix - plain.H_before.matrix)), 1e-14);
    }
    EXPECT_THROW(gauge_reduce(p, {}, std::vector<Vec3>(2), l), std::invalid_argument);
}
