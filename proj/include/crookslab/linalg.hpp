#pragma once

// Dense complex linear algebra for small Hilbert spaces (dim 2 and 6):
// matrix exponentials, Hermitian spectral decompositions, time-ordered
// propagators and thermal states.
//
// Unit conventions used throughout the library:
//   * Hamiltonians are built from frequencies (kHz for the switching
//     problem, MHz for the pulse problem); "angular" operators carry
//     2*pi*frequency entries, i.e. rad/ms or rad/us.
//   * Spectral energies are reported as plain frequencies (E/h), so an
//     angular-tagged input is divided by 2*pi.
//   * Inverse temperature is h*beta in 1/kHz; Gibbs weights are
//     exp(-h_beta * f) with f in kHz.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace crookslab {

using Complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

inline constexpr double two_pi = 6.283185307179586476925286766559;

inline void require_square(const Operator& a, const char* what) {
    if (a.rows() != a.cols() || a.rows() == 0) {
        throw std::invalid_argument(std::string(what) + ": operator must be a non-empty square matrix");
    }
}

/// Max element-wise deviation from A = A^dagger.
inline double hermiticity_defect(const Operator& a) {
    return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

/// Max element-wise deviation of U^dagger U from the identity.
inline double unitarity_defect(const Operator& u) {
    Operator g = u.adjoint() * u;
    g -= Operator::Identity(u.rows(), u.cols());
    return g.cwiseAbs().maxCoeff();
}

inline void require_hermitian(const Operator& a, const char* what, double tol = 1e-12) {
    require_square(a, what);
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if (hermiticity_defect(a) > tol * scale) {
        throw std::invalid_argument(std::string(what) + ": operator is not Hermitian");
    }
}

inline void require_unitary(const Operator& u, const char* what, double tol = 1e-9) {
    require_square(u, what);
    if (unitarity_defect(u) > tol) {
        throw std::invalid_argument(std::string(what) + ": operator is not unitary");
    }
}

/// exp(scale * a) by Pade-13 scaling and squaring (Higham 2005).
/// Accurate to ~1e-15 relative for the small dense matrices used here.
inline Operator matrix_exp(const Operator& a, Complex scale = Complex(1.0, 0.0)) {
    require_square(a, "matrix_exp");
    if (a.rows() > 16) {
        throw std::invalid_argument("matrix_exp: dimension > 16 not supported");
    }
    const Eigen::Index n = a.rows();
    Operator x = scale * a;

    // 1-norm based scaling
    const double norm1 = x.cwiseAbs().colwise().sum().maxCoeff();
    constexpr double theta13 = 5.371920351148152;
    int squarings = 0;
    if (norm1 > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
        x /= std::pow(2.0, squarings);
    }

    static constexpr double b[14] = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0,  129060195264000.0,   10559470521600.0,
        670442572800.0,      33522128640.0,       1323241920.0,
        40840800.0,          960960.0,            16380.0,
        182.0,               1.0};

    const Operator id = Operator::Identity(n, n);
    const Operator x2 = x * x;
    const Operator x4 = x2 * x2;
    const Operator x6 = x2 * x4;
    const Operator u =
        x * (x6 * (b[13] * x6 + b[11] * x4 + b[9] * x2) + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * id);
    const Operator v =
        x6 * (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * id;

    Operator r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) {
        r = r * r;
    }
    return r;
}

/// Whether spectral energies should be read off directly (plain) or as
/// angular frequencies to be converted to kHz (divide by 2*pi). The caller
/// tags the unit of the operator it hands in.
enum class SpectrumUnits { plain, angular };

struct SpectralDecomposition {
    Eigen::VectorXd energies;  ///< ascending, kHz for angular input
    Operator vectors;          ///< orthonormal eigenvectors, one column per energy

    int dim() const { return static_cast<int>(energies.size()); }

    /// Energy gap E[j] - E[i].
    double gap(int i, int j) const { return energies[j] - energies[i]; }
};

/// Spectral decomposition of a Hermitian operator with a deterministic
/// eigenvector phase: the largest-modulus component of each vector is made
/// real and positive (first such component on ties).
inline SpectralDecomposition eig_hermitian(const Operator& a, SpectrumUnits units = SpectrumUnits::angular) {
    require_hermitian(a, "eig_hermitian");
    Eigen::SelfAdjointEigenSolver<Operator> solver((a + a.adjoint()) / 2.0);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("eig_hermitian: eigensolver failed to converge");
    }

    SpectralDecomposition out;
    out.energies = solver.eigenvalues();
    if (units == SpectrumUnits::angular) {
        out.energies /= two_pi;
    }
    out.vectors = solver.eigenvectors();

    for (Eigen::Index k = 0; k < out.vectors.cols(); ++k) {
        Eigen::Index imax = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < out.vectors.rows(); ++i) {
            const double m = std::abs(out.vectors(i, k));
            if (m > best + 1e-15) {
                best = m;
                imax = i;
            }
        }
        const Complex c = out.vectors(imax, k);
        if (std::abs(c) > 0.0) {
            out.vectors.col(k) *= std::conj(c) / std::abs(c);
        }
    }
    return out;
}

struct DensityMatrix {
    Operator rho;

    double trace() const { return rho.trace().real(); }
    /// Population of a (normalized) pure state.
    double population(const StateVector& v) const { return (v.adjoint() * rho * v)(0, 0).real(); }

    /// Hermitian, unit trace to 1e-12, eigenvalues >= -1e-12.
    void validate() const {
        require_hermitian(rho, "DensityMatrix");
        if (std::abs(trace() - 1.0) > 1e-12) {
            throw std::invalid_argument("DensityMatrix: trace must be 1");
        }
        Eigen::SelfAdjointEigenSolver<Operator> solver((rho + rho.adjoint()) / 2.0);
        if (solver.eigenvalues().minCoeff() < -1e-12) {
            throw std::invalid_argument("DensityMatrix: not positive semidefinite");
        }
    }
};

/// Gibbs state exp(-h_beta * h) / Z for an operator whose eigenvalues are
/// plain frequencies in kHz. The spectrum is shifted by its minimum before
/// exponentiation so arbitrarily cold states stay finite.
inline DensityMatrix thermal_state(const Operator& h_khz, double h_beta) {
    require_hermitian(h_khz, "thermal_state");
    if (!(h_beta >= 0.0) || !std::isfinite(h_beta)) {
        throw std::invalid_argument("thermal_state: h_beta must be finite and >= 0");
    }
    Eigen::SelfAdjointEigenSolver<Operator> solver((h_khz + h_khz.adjoint()) / 2.0);
    const double e_min = solver.eigenvalues().minCoeff();
    const Operator shifted = h_khz - e_min * Operator::Identity(h_khz.rows(), h_khz.cols());
    Operator w = matrix_exp(shifted, Complex(-h_beta, 0.0));
    w /= w.trace().real();
    return DensityMatrix{(w + w.adjoint()) / 2.0};
}

using HamiltonianOfTime = std::function<Operator(double /*t_ms*/)>;

/// Time-ordered propagator for a time-dependent Hermitian generator in
/// rad/ms over [0, duration_ms], as a product of per-slice exponentials
/// (latest factor leftmost). Each slice uses the fourth-order two-exponential
/// Gauss rule, so doubling `slices` perturbs the result far below 1e-8 for
/// the smooth drives used here.
inline Operator propagate(const HamiltonianOfTime& h_of_t, double duration_ms, int slices) {
    if (slices < 1) {
        throw std::invalid_argument("propagate: slices must be >= 1");
    }
    if (!(duration_ms >= 0.0) || !std::isfinite(duration_ms)) {
        throw std::invalid_argument("propagate: duration must be finite and >= 0");
    }

    const double dt = duration_ms / slices;
    // Gauss-Legendre nodes on each slice and fourth-order weights
    const double node_offset = std::sqrt(3.0) / 6.0;  // nodes at mid -/+ offset*dt
    const double w_near = 0.25 + node_offset;
    const double w_far = 0.25 - node_offset;

    Operator u;
    for (int k = 0; k < slices; ++k) {
        const double t0 = (static_cast<double>(k) + 0.5 - node_offset) * dt;
        const double t1 = (static_cast<double>(k) + 0.5 + node_offset) * dt;
        const Operator h0 = h_of_t(t0);
        const Operator h1 = h_of_t(t1);
        require_hermitian(h0, "propagate: callback");
        require_hermitian(h1, "propagate: callback");

        const Operator g_early = w_near * h0 + w_far * h1;
        const Operator g_late = w_far * h0 + w_near * h1;
        Operator step = matrix_exp(g_late, Complex(0.0, -dt)) * matrix_exp(g_early, Complex(0.0, -dt));
        u = (k == 0) ? step : Operator(step * u);
    }
    return u;
}

}  // namespace crookslab
