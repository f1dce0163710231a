#pragma once

// The driven two-level switching protocols: a constant Z amplitude plus a
// half-cosine X ramp, their time reversal, instantaneous spectra and the
// adiabaticity parameter Gamma.

#include <crookslab/linalg.hpp>

#include <cmath>
#include <stdexcept>

namespace crookslab {

/// S_z' = (|1><1| - |0><0|)/2 in basis order (|0>, |1>).
inline Operator s_z_prime() {
    Operator s(2, 2);
    s << Complex(-0.5, 0.0), Complex(0.0, 0.0), Complex(0.0, 0.0), Complex(0.5, 0.0);
    return s;
}

/// S_x' = (|1><0| + |0><1|)/2.
inline Operator s_x_prime() {
    Operator s(2, 2);
    s << Complex(0.0, 0.0), Complex(0.5, 0.0), Complex(0.5, 0.0), Complex(0.0, 0.0);
    return s;
}

enum class Direction { forward, reversed };

inline const char* to_string(Direction d) { return d == Direction::forward ? "forward" : "reversed"; }

/// Switching Hamiltonian family H(t) = 2*pi*[Z(t) S_z' + X(t) S_x'] with
/// Z(t) = z0 and X(t) = x_max*(1 - cos(pi t/tau))/2; the reversed protocol
/// evaluates the forward one at tau - t.
struct SwitchingProtocol {
    double z0_khz = 2.0;
    double x_max_khz = 5.0;
    double tau_us = 25.0;
    Direction direction = Direction::forward;

    void validate() const {
        if (!(tau_us > 0.0) || !std::isfinite(tau_us)) {
            throw std::invalid_argument("SwitchingProtocol: tau must be finite and > 0");
        }
        if (!(x_max_khz >= 0.0) || !(z0_khz > 0.0)) {
            throw std::invalid_argument("SwitchingProtocol: need x_max >= 0 and z0 > 0");
        }
    }

    double tau_ms() const { return tau_us * 1e-3; }

    SwitchingProtocol reversed() const {
        SwitchingProtocol p = *this;
        p.direction = (direction == Direction::forward) ? Direction::reversed : Direction::forward;
        return p;
    }
};

namespace detail {

inline void require_in_window(const SwitchingProtocol& p, double t_us) {
    const double slack = 1e-9 * p.tau_us;
    if (!(t_us >= -slack) || !(t_us <= p.tau_us + slack)) {
        throw std::out_of_range("switching: t outside [0, tau]");
    }
}

/// Time argument actually fed to the forward pulse shapes.
inline double effective_time_us(const SwitchingProtocol& p, double t_us) {
    return p.direction == Direction::forward ? t_us : p.tau_us - t_us;
}

}  // namespace detail

/// Instantaneous Z amplitude in kHz (constant for this family).
inline double z_amplitude(const SwitchingProtocol& p, double t_us) {
    detail::require_in_window(p, t_us);
    return p.z0_khz;
}

/// Instantaneous X amplitude in kHz.
inline double x_amplitude(const SwitchingProtocol& p, double t_us) {
    detail::require_in_window(p, t_us);
    const double te = detail::effective_time_us(p, t_us);
    return p.x_max_khz * (1.0 - std::cos(M_PI * te / p.tau_us)) / 2.0;
}

/// H(t) in rad/ms.
inline Operator hamiltonian_at(const SwitchingProtocol& p, double t_us) {
    p.validate();
    const double z = z_amplitude(p, t_us);
    const double x = x_amplitude(p, t_us);
    return two_pi * (z * s_z_prime() + x * s_x_prime());
}

/// Instantaneous eigenvalue gap sqrt(Z^2 + X^2) in kHz.
inline double instantaneous_gap(const SwitchingProtocol& p, double t_us) {
    return std::hypot(z_amplitude(p, t_us), x_amplitude(p, t_us));
}

/// dX/dt of the effective drive in kHz/ms (signed).
inline double x_rate_khz_per_ms(const SwitchingProtocol& p, double t_us) {
    detail::require_in_window(p, t_us);
    const double te = detail::effective_time_us(p, t_us);
    const double rate = p.x_max_khz * M_PI * std::sin(M_PI * te / p.tau_us) / (2.0 * p.tau_ms());
    return p.direction == Direction::forward ? rate : -rate;
}

/// Adiabaticity parameter: max over a uniform time grid of
/// |<n1(t)| dH/dt |n2(t)>| / (omega_1(t) - omega_2(t))^2, with the numerator
/// in rad/ms^2 and the angular gap in rad/ms, so the ratio is dimensionless.
inline double adiabaticity(const SwitchingProtocol& p, int samples = 1001) {
    p.validate();
    if (samples < 100) {
        throw std::invalid_argument("adiabaticity: need samples >= 100");
    }
    const Operator sx = s_x_prime();
    double gamma = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double t_us = p.tau_us * static_cast<double>(k) / static_cast<double>(samples - 1);
        const SpectralDecomposition spec = eig_hermitian(hamiltonian_at(p, t_us));
        const Operator dh_dt = two_pi * x_rate_khz_per_ms(p, t_us) * sx;  // rad/ms^2
        const Complex elem = (spec.vectors.col(0).adjoint() * dh_dt * spec.vectors.col(1))(0, 0);
        const double angular_gap = two_pi * spec.gap(0, 1);  // rad/ms
        gamma = std::max(gamma, std::abs(elem) / (angular_gap * angular_gap));
    }
    return gamma;
}

/// Time-ordered propagator of the protocol over [0, tau].
inline Operator protocol_propagator(const SwitchingProtocol& p, int slices = 4000) {
    p.validate();
    return propagate([&p](double t_ms) { return hamiltonian_at(p, t_ms * 1e3); }, p.tau_ms(), slices);
}

}  // namespace crookslab
