#include <crookslab/linalg.hpp>
#include <crookslab/switching.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace crookslab;
using testutil::max_abs_diff;

TEST(MatrixExp, ZeroScaleGivesIdentity) {
    std::mt19937_64 gen(11);
    const Operator a = testutil::random_complex_matrix(4, gen);
    const Operator e = matrix_exp(a, Complex(0.0, 0.0));
    EXPECT_LT(max_abs_diff(e, Operator::Identity(4, 4)), 1e-15);
}

TEST(MatrixExp, PiPulseClosedForm) {
    // exp(-i pi S_x') = -i (|0><1| + |1><0|)
    const Operator e = matrix_exp(s_x_prime(), Complex(0.0, -M_PI));
    Operator expected(2, 2);
    expected << Complex(0, 0), Complex(0, -1), Complex(0, -1), Complex(0, 0);
    EXPECT_LT(max_abs_diff(e, expected), 1e-14);
}

TEST(MatrixExp, DiagonalClosedForm) {
    Operator d = Operator::Zero(2, 2);
    d(0, 0) = Complex(0.3, -0.2);
    d(1, 1) = Complex(-1.5, 0.7);
    const Complex s(0.4, 1.1);
    const Operator e = matrix_exp(d, s);
    EXPECT_LT(std::abs(e(0, 0) - std::exp(s * d(0, 0))), 1e-13);
    EXPECT_LT(std::abs(e(1, 1) - std::exp(s * d(1, 1))), 1e-13);
    EXPECT_LT(std::abs(e(0, 1)), 1e-15);
    EXPECT_LT(std::abs(e(1, 0)), 1e-15);
}

TEST(MatrixExp, MatchesTaylorOracle) {
    std::mt19937_64 gen(42);
    for (int dim : {2, 3, 6, 8}) {
        for (int rep = 0; rep < 8; ++rep) {
            const Operator a = 5.0 * testutil::random_complex_matrix(dim, gen);
            const Complex scale = (rep % 2 == 0) ? Complex(1.0, 0.0) : Complex(0.0, -0.7);
            const Operator got = matrix_exp(a, scale);
            const Operator want = testutil::taylor_expm(a, scale);
            const double rel = max_abs_diff(got, want) / std::max(1.0, want.cwiseAbs().maxCoeff());
            EXPECT_LT(rel, 1e-12) << "dim " << dim << " rep " << rep;
        }
    }
}

TEST(MatrixExp, RejectsBadInput) {
    EXPECT_THROW(matrix_exp(Operator::Zero(2, 3)), std::invalid_argument);
    EXPECT_THROW(matrix_exp(Operator::Zero(17, 17)), std::invalid_argument);
}

TEST(EigHermitian, SwitchingStartHamiltonian) {
    // H = 2 pi * 2 kHz * S_z' -> energies {-1, +1} kHz, eigenvectors {|0>, |1>}
    const Operator h = two_pi * 2.0 * s_z_prime();
    const SpectralDecomposition spec = eig_hermitian(h);
    EXPECT_NEAR(spec.energies[0], -1.0, 1e-12);
    EXPECT_NEAR(spec.energies[1], 1.0, 1e-12);
    EXPECT_LT(std::abs(spec.vectors(0, 0) - Complex(1, 0)), 1e-12);
    EXPECT_LT(std::abs(spec.vectors(1, 1) - Complex(1, 0)), 1e-12);
}

TEST(EigHermitian, SwitchingEndHamiltonian) {
    const Operator h = two_pi * (2.0 * s_z_prime() + 5.0 * s_x_prime());
    const SpectralDecomposition spec = eig_hermitian(h);
    const double half_gap = std::sqrt(29.0) / 2.0;
    EXPECT_NEAR(spec.energies[0], -half_gap, 1e-12);
    EXPECT_NEAR(spec.energies[1], half_gap, 1e-12);
}

TEST(EigHermitian, DegenerateIdentityPlainUnits) {
    const SpectralDecomposition spec = eig_hermitian(Operator::Identity(2, 2), SpectrumUnits::plain);
    EXPECT_NEAR(spec.energies[0], 1.0, 1e-14);
    EXPECT_NEAR(spec.energies[1], 1.0, 1e-14);
    // orthonormal pair obeying the phase convention
    const Operator g = spec.vectors.adjoint() * spec.vectors;
    EXPECT_LT(max_abs_diff(g, Operator::Identity(2, 2)), 1e-12);
    for (int k = 0; k < 2; ++k) {
        Eigen::Index imax = 0;
        spec.vectors.col(k).cwiseAbs().maxCoeff(&imax);
        EXPECT_GT(spec.vectors(imax, k).real(), 0.0);
        EXPECT_LT(std::abs(spec.vectors(imax, k).imag()), 1e-12);
    }
}

TEST(EigHermitian, SpectralReconstruction) {
    std::mt19937_64 gen(3);
    for (int dim : {2, 4, 6}) {
        const Operator h = 10.0 * testutil::random_hermitian(dim, gen);
        const SpectralDecomposition spec = eig_hermitian(h);
        Operator rebuilt = Operator::Zero(dim, dim);
        for (int k = 0; k < dim; ++k) {
            rebuilt += spec.energies[k] * (spec.vectors.col(k) * spec.vectors.col(k).adjoint());
        }
        EXPECT_LT(max_abs_diff(rebuilt, h / two_pi), 1e-10);
        for (int k = 0; k + 1 < dim; ++k) {
            EXPECT_LE(spec.energies[k], spec.energies[k + 1]);
        }
        EXPECT_LT(max_abs_diff(spec.vectors.adjoint() * spec.vectors, Operator::Identity(dim, dim)), 1e-10);
    }
}

TEST(EigHermitian, RejectsNonHermitian) {
    Operator bad(2, 2);
    bad << Complex(0, 0), Complex(1, 0), Complex(0, 0), Complex(0, 0);
    EXPECT_THROW(eig_hermitian(bad), std::invalid_argument);
}

TEST(ThermalState, InfiniteTemperatureIsMaximallyMixed) {
    Operator h = Operator::Zero(2, 2);
    h(0, 0) = -1.0;
    h(1, 1) = 1.0;
    const DensityMatrix rho = thermal_state(h, 0.0);
    EXPECT_LT(max_abs_diff(rho.rho, 0.5 * Operator::Identity(2, 2)), 1e-14);
}

TEST(ThermalState, TwoLevelGibbsClosedForm) {
    Operator h = Operator::Zero(2, 2);
    h(0, 0) = -1.0;  // kHz, gap 2 kHz
    h(1, 1) = 1.0;
    const double hb = 0.22;
    const DensityMatrix rho = thermal_state(h, hb);
    const double expected_ground = std::exp(hb) / (std::exp(hb) + std::exp(-hb));
    EXPECT_NEAR(rho.rho(0, 0).real(), expected_ground, 1e-13);
    EXPECT_NEAR(rho.trace(), 1.0, 1e-13);
}

TEST(ThermalState, ZeroTemperatureLimit) {
    Operator h = Operator::Zero(2, 2);
    h(0, 0) = -1.0;
    h(1, 1) = 1.0;
    const DensityMatrix rho = thermal_state(h, 100.0);
    EXPECT_NEAR(rho.rho(0, 0).real(), 1.0, 1e-12);
}

TEST(ThermalState, GibbsRatioProperty) {
    std::mt19937_64 gen(5);
    const Operator h = 3.0 * testutil::random_hermitian(2, gen);
    const double hb = 0.37;
    const DensityMatrix rho = thermal_state(h, hb);
    const SpectralDecomposition spec = eig_hermitian(h, SpectrumUnits::plain);
    const double p0 = rho.population(spec.vectors.col(0));
    const double p1 = rho.population(spec.vectors.col(1));
    EXPECT_NEAR(std::log(p0 / p1), hb * (spec.energies[1] - spec.energies[0]), 1e-10);
}

TEST(ThermalState, RejectsNegativeBeta) {
    EXPECT_THROW(thermal_state(Operator::Identity(2, 2), -0.1), std::invalid_argument);
}

TEST(ThermalState, ProducesValidDensityMatrices) {
    std::mt19937_64 gen(7);
    for (double hb : {0.0, 0.22, 3.0, 100.0}) {
        const DensityMatrix rho = thermal_state(4.0 * testutil::random_hermitian(2, gen), hb);
        rho.validate();
    }
    DensityMatrix bad{0.7 * Operator::Identity(2, 2)};
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Propagate, ConstantHamiltonianMatchesMatrixExp) {
    const Operator h = two_pi * (2.0 * s_z_prime() + 5.0 * s_x_prime());
    const double duration = 0.05;
    const Operator u = propagate([&h](double) { return h; }, duration, 17);
    EXPECT_LT(max_abs_diff(u, matrix_exp(h, Complex(0.0, -duration))), 1e-12);
}

TEST(Propagate, ZeroHamiltonianGivesIdentity) {
    const Operator u = propagate([](double) { return Operator::Zero(2, 2); }, 1.0, 5);
    EXPECT_LT(max_abs_diff(u, Operator::Identity(2, 2)), 1e-14);
}

TEST(Propagate, SliceDoublingConvergence) {
    for (double tau_us : {25.0, 100.0, 300.0}) {
        SwitchingProtocol p;
        p.tau_us = tau_us;
        const Operator u1 = protocol_propagator(p, 4000);
        const Operator u2 = protocol_propagator(p, 8000);
        EXPECT_LT(max_abs_diff(u1, u2), 1e-8) << "tau " << tau_us;
        EXPECT_LT(unitarity_defect(u1), 1e-9);
    }
}

TEST(Propagate, SuddenProtocolTransitionSelfConvergence) {
    SwitchingProtocol p;
    p.tau_us = 25.0;
    const SpectralDecomposition start = eig_hermitian(hamiltonian_at(p, 0.0));
    const SpectralDecomposition end = eig_hermitian(hamiltonian_at(p, p.tau_us));
    auto ground_to_ground = [&](int slices) {
        const Operator u = protocol_propagator(p, slices);
        return std::norm((end.vectors.col(0).adjoint() * u * start.vectors.col(0))(0, 0));
    };
    EXPECT_NEAR(ground_to_ground(4000), ground_to_ground(8000), 0.5e-4);
}

TEST(Propagate, RejectsBadInput) {
    EXPECT_THROW(propagate([](double) { return Operator::Zero(2, 2); }, 1.0, 0), std::invalid_argument);
    Operator bad(2, 2);
    bad << Complex(0, 0), Complex(1, 0), Complex(0, 0), Complex(0, 0);
    EXPECT_THROW(propagate([&bad](double) { return bad; }, 1.0, 3), std::invalid_argument);
}
