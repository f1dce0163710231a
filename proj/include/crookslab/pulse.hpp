#pragma once

// Robust optimal control of a nuclear-spin-selective electron pi rotation on
// the 6-dimensional nuclear(spin-1) x electron(2-level) space. Piecewise-
// constant microwave amplitudes are optimized by gradient ascent on a mean
// gate fidelity over a grid of amplitude (alpha) and dephasing (delta)
// noise values.

#include <crookslab/format.hpp>
#include <crookslab/linalg.hpp>
#include <crookslab/rng.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace crookslab {

/// Piecewise-constant control amplitudes in MHz over equal-length segments.
struct ControlPulse {
    std::vector<double> omega_x_mhz;
    std::vector<double> omega_y_mhz;
    double total_time_us = 0.0;
    double amplitude_bound_mhz = 0.0;

    int segments() const { return static_cast<int>(omega_x_mhz.size()); }
    double segment_amplitude(int i) const { return std::hypot(omega_x_mhz[i], omega_y_mhz[i]); }

    void validate() const {
        if (omega_x_mhz.empty() || omega_x_mhz.size() != omega_y_mhz.size()) {
            throw std::invalid_argument("ControlPulse: need >= 1 segment with matching x/y amplitudes");
        }
        if (!(total_time_us > 0.0) || !(amplitude_bound_mhz >= 0.0)) {
            throw std::invalid_argument("ControlPulse: need total_time > 0 and amplitude_bound >= 0");
        }
        for (int i = 0; i < segments(); ++i) {
            if (segment_amplitude(i) > amplitude_bound_mhz * (1.0 + 1e-9) + 1e-12) {
                throw std::invalid_argument("ControlPulse: segment amplitude exceeds bound");
            }
        }
    }

    /// Clip every segment onto the amplitude disk.
    void project_onto_bound() {
        for (int i = 0; i < segments(); ++i) {
            const double a = segment_amplitude(i);
            if (a > amplitude_bound_mhz && a > 0.0) {
                const double s = amplitude_bound_mhz / a;
                omega_x_mhz[i] *= s;
                omega_y_mhz[i] *= s;
            }
        }
    }
};

/// Rectangular (alpha, delta) noise grid; both ranges must contain the
/// nominal point (0, 0).
struct NoiseGrid {
    double alpha_min = -0.05;
    double alpha_max = 0.05;
    double delta_min_mhz = -0.2;
    double delta_max_mhz = 0.2;
    int alpha_points = 5;
    int delta_points = 5;

    static NoiseGrid nominal_only() { return {0.0, 0.0, 0.0, 0.0, 1, 1}; }

    void validate() const {
        if (alpha_points < 1 || delta_points < 1) {
            throw std::invalid_argument("NoiseGrid: need >= 1 point per axis");
        }
        if (!(alpha_min <= 0.0 && 0.0 <= alpha_max) || !(delta_min_mhz <= 0.0 && 0.0 <= delta_max_mhz)) {
            throw std::invalid_argument("NoiseGrid: ranges must contain the nominal point 0");
        }
    }

    std::vector<double> alphas() const { return linspace(alpha_min, alpha_max, alpha_points); }
    std::vector<double> deltas() const { return linspace(delta_min_mhz, delta_max_mhz, delta_points); }

private:
    static std::vector<double> linspace(double lo, double hi, int n) {
        std::vector<double> v(static_cast<std::size_t>(n));
        if (n == 1) {
            v[0] = 0.0;  // degenerate grid sits at the nominal point
            return v;
        }
        for (int k = 0; k < n; ++k) {
            v[static_cast<std::size_t>(k)] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
        }
        return v;
    }
};

/// Six-level model in the fixed basis order
/// |1>n|0>e, |0>n|0>e, |-1>n|0>e, |1>n|-1>e, |0>n|-1>e, |-1>n|-1>e.
struct SixLevelModel {
    double a_zz_mhz = -2.16;  ///< longitudinal hyperfine coupling

    double default_total_time_us() const { return 4.0 / std::abs(a_zz_mhz); }
    double default_amplitude_bound_mhz() const { return std::abs(a_zz_mhz) / 2.0; }

    /// Rotating-frame drift H0 = 2 pi A_zz I_z x |-1>e<-1| in rad/us.
    /// Hyperfine phases wrap to unity at T = 4/|A_zz|.
    Operator drift() const {
        Operator h = Operator::Zero(6, 6);
        h(3, 3) = two_pi * a_zz_mhz;         // n = +1, e = -1
        h(5, 5) = two_pi * a_zz_mhz * -1.0;  // n = -1, e = -1
        return h;
    }

    /// H_x = 1_n x S_x' (dimensionless; multiplied by 2 pi Omega_x later).
    static Operator control_x() {
        Operator h = Operator::Zero(6, 6);
        for (int n = 0; n < 3; ++n) {
            h(n, n + 3) = Complex(0.5, 0.0);
            h(n + 3, n) = Complex(0.5, 0.0);
        }
        return h;
    }

    /// H_y = 1_n x S_y'.
    static Operator control_y() {
        Operator h = Operator::Zero(6, 6);
        for (int n = 0; n < 3; ++n) {
            h(n, n + 3) = Complex(0.0, -0.5);
            h(n + 3, n) = Complex(0.0, 0.5);
        }
        return h;
    }

    /// Static dephasing H_d = 1_n x 2 pi delta S_z' in rad/us.
    static Operator dephasing(double delta_mhz) {
        Operator h = Operator::Zero(6, 6);
        for (int n = 0; n < 3; ++n) {
            h(n, n) = two_pi * delta_mhz * 0.5;
            h(n + 3, n + 3) = two_pi * delta_mhz * -0.5;
        }
        return h;
    }

    /// Target: electron pi rotation about x on the |-1>n subspace, identity
    /// on the other nuclear subspaces. exp(-i pi S_x') = -i (2 S_x').
    static Operator target() {
        Operator u = Operator::Zero(6, 6);
        u(0, 0) = u(1, 1) = u(3, 3) = u(4, 4) = Complex(1.0, 0.0);
        u(2, 5) = Complex(0.0, -1.0);
        u(5, 2) = Complex(0.0, -1.0);
        return u;
    }
};

namespace detail {

struct SegmentEig {
    Eigen::VectorXd evals;
    Operator evecs;
    Operator u;  ///< exp(-i H dt)
};

inline SegmentEig segment_propagator(const Operator& h, double dt_us) {
    Eigen::SelfAdjointEigenSolver<Operator> solver((h + h.adjoint()) / 2.0);
    SegmentEig s;
    s.evals = solver.eigenvalues();
    s.evecs = solver.eigenvectors();
    Eigen::VectorXcd phases(s.evals.size());
    for (Eigen::Index k = 0; k < s.evals.size(); ++k) {
        phases[k] = std::exp(Complex(0.0, -s.evals[k] * dt_us));
    }
    s.u = s.evecs * phases.asDiagonal() * s.evecs.adjoint();
    return s;
}

/// Frechet derivative of exp(-i H dt) in direction E for Hermitian H, via
/// the divided-difference (Loewner) matrix in the eigenbasis. The uniformly
/// stable sinc form covers degenerate eigenvalue pairs.
inline Operator segment_derivative(const SegmentEig& s, const Operator& direction, double dt_us) {
    const Eigen::Index n = s.evals.size();
    Operator e_tilde = s.evecs.adjoint() * direction * s.evecs;
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index l = 0; l < n; ++l) {
            const double mean = (s.evals[k] + s.evals[l]) / 2.0;
            const double half_diff = (s.evals[k] - s.evals[l]) * dt_us / 2.0;
            const double sinc = std::abs(half_diff) < 1e-8 ? 1.0 : std::sin(half_diff) / half_diff;
            const Complex phi = Complex(0.0, -dt_us) * std::exp(Complex(0.0, -mean * dt_us)) * sinc;
            e_tilde(k, l) *= phi;
        }
    }
    return s.evecs * e_tilde * s.evecs.adjoint();
}

inline Operator segment_hamiltonian(const SixLevelModel& model, const ControlPulse& pulse, int i, double alpha,
                                    double delta_mhz) {
    return model.drift() +
           (1.0 + alpha) * two_pi *
               (pulse.omega_x_mhz[static_cast<std::size_t>(i)] * SixLevelModel::control_x() +
                pulse.omega_y_mhz[static_cast<std::size_t>(i)] * SixLevelModel::control_y()) +
           SixLevelModel::dephasing(delta_mhz);
}

}  // namespace detail

/// Propagator of the whole pulse at one noise point, earliest segment
/// applied first.
inline Operator pulse_propagator(const ControlPulse& pulse, const SixLevelModel& model, double alpha,
                                 double delta_mhz) {
    pulse.validate();
    const int m = pulse.segments();
    const double dt = pulse.total_time_us / m;
    Operator u = Operator::Identity(6, 6);
    for (int i = 0; i < m; ++i) {
        const Operator h = detail::segment_hamiltonian(model, pulse, i, alpha, delta_mhz);
        u = detail::segment_propagator(h, dt).u * u;
    }
    return u;
}

/// Gate fidelity |Tr(U_targ^dag U)|^2 / 36 for a 6x6 unitary.
inline double gate_fidelity(const Operator& u, const SixLevelModel& model) {
    (void)model;
    if (u.rows() != 6 || u.cols() != 6) {
        throw std::invalid_argument("gate_fidelity: expected a 6x6 operator");
    }
    require_unitary(u, "gate_fidelity");
    const Complex z = (SixLevelModel::target().adjoint() * u).trace();
    return std::norm(z) / 36.0;
}

/// Mean gate fidelity over the noise grid.
inline double robust_objective(const ControlPulse& pulse, const SixLevelModel& model, const NoiseGrid& grid) {
    grid.validate();
    double sum = 0.0;
    int count = 0;
    for (double alpha : grid.alphas()) {
        for (double delta : grid.deltas()) {
            sum += gate_fidelity(pulse_propagator(pulse, model, alpha, delta), model);
            ++count;
        }
    }
    return sum / count;
}

/// Smallest grid-point fidelity of a pulse.
inline double worst_grid_fidelity(const ControlPulse& pulse, const SixLevelModel& model, const NoiseGrid& grid) {
    grid.validate();
    double worst = 1.0;
    for (double alpha : grid.alphas()) {
        for (double delta : grid.deltas()) {
            worst = std::min(worst, gate_fidelity(pulse_propagator(pulse, model, alpha, delta), model));
        }
    }
    return worst;
}

/// Exact gradient of robust_objective with respect to the 2M amplitudes,
/// ordered (d/dOmega_x[0..M-1], d/dOmega_y[0..M-1]).
inline std::vector<double> robust_objective_gradient(const ControlPulse& pulse, const SixLevelModel& model,
                                                     const NoiseGrid& grid) {
    pulse.validate();
    grid.validate();
    const int m = pulse.segments();
    const double dt = pulse.total_time_us / m;
    const Operator target_dag = SixLevelModel::target().adjoint();
    const Operator hx = SixLevelModel::control_x();
    const Operator hy = SixLevelModel::control_y();

    std::vector<double> grad(static_cast<std::size_t>(2 * m), 0.0);
    int grid_count = 0;

    for (double alpha : grid.alphas()) {
        for (double delta : grid.deltas()) {
            ++grid_count;
            std::vector<detail::SegmentEig> segs;
            segs.reserve(static_cast<std::size_t>(m));
            for (int i = 0; i < m; ++i) {
                segs.push_back(
                    detail::segment_propagator(detail::segment_hamiltonian(model, pulse, i, alpha, delta), dt));
            }
            // prefix[i] = U_i ... U_1 (prefix[0] = I), suffix[i] = U_M ... U_{i+1}
            std::vector<Operator> prefix(static_cast<std::size_t>(m) + 1);
            std::vector<Operator> suffix(static_cast<std::size_t>(m) + 1);
            prefix[0] = Operator::Identity(6, 6);
            for (int i = 0; i < m; ++i) {
                prefix[static_cast<std::size_t>(i) + 1] = segs[static_cast<std::size_t>(i)].u * prefix[static_cast<std::size_t>(i)];
            }
            suffix[static_cast<std::size_t>(m)] = Operator::Identity(6, 6);
            for (int i = m - 1; i >= 0; --i) {
                suffix[static_cast<std::size_t>(i)] = suffix[static_cast<std::size_t>(i) + 1] * segs[static_cast<std::size_t>(i)].u;
            }
            const Complex z = (target_dag * prefix[static_cast<std::size_t>(m)]).trace();
            const double scale = (1.0 + alpha) * two_pi;

            for (int i = 0; i < m; ++i) {
                // d z / d theta = Tr(G dU_i) with G = L_{i-1} Utarg^dag R_{i+1}
                const Operator g =
                    prefix[static_cast<std::size_t>(i)] * target_dag * suffix[static_cast<std::size_t>(i) + 1];
                const Operator dux = detail::segment_derivative(segs[static_cast<std::size_t>(i)], scale * hx, dt);
                const Operator duy = detail::segment_derivative(segs[static_cast<std::size_t>(i)], scale * hy, dt);
                const Complex dzx = (g * dux).trace();
                const Complex dzy = (g * duy).trace();
                grad[static_cast<std::size_t>(i)] += 2.0 * (std::conj(z) * dzx).real() / 36.0;
                grad[static_cast<std::size_t>(m + i)] += 2.0 * (std::conj(z) * dzy).real() / 36.0;
            }
        }
    }
    for (double& g : grad) {
        g /= grid_count;
    }
    return grad;
}

/// Central finite-difference gradient of robust_objective (reference path
/// for gradient verification; step in MHz).
inline std::vector<double> robust_objective_gradient_fd(const ControlPulse& pulse, const SixLevelModel& model,
                                                        const NoiseGrid& grid, double step_mhz = 1e-6) {
    const int m = pulse.segments();
    std::vector<double> grad(static_cast<std::size_t>(2 * m), 0.0);
    ControlPulse work = pulse;
    for (int k = 0; k < 2 * m; ++k) {
        double& amp = (k < m) ? work.omega_x_mhz[static_cast<std::size_t>(k)]
                              : work.omega_y_mhz[static_cast<std::size_t>(k - m)];
        const double saved = amp;
        amp = saved + step_mhz;
        const double hi = robust_objective(work, model, grid);
        amp = saved - step_mhz;
        const double lo = robust_objective(work, model, grid);
        amp = saved;
        grad[static_cast<std::size_t>(k)] = (hi - lo) / (2.0 * step_mhz);
    }
    return grad;
}

struct PulseOptimizerConfig {
    int segments = 10;
    double amplitude_bound_mhz = 1.08;  // |A_zz|/2 for the default model
    int starts = 20;
    int max_iterations = 400;
    int lbfgs_memory = 8;
    double target_objective = 0.98;
    double stop_objective = 1.0 - 1e-9;
    double gradient_tolerance = 1e-10;
    double total_time_us = 0.0;  ///< 0 selects the model default 4/|A_zz|
};

struct PulseOptimizationResult {
    ControlPulse pulse;
    double objective = 0.0;          ///< mean grid fidelity of the returned pulse
    double nominal_fidelity = 0.0;   ///< fidelity at (alpha, delta) = (0, 0)
    bool reached_target = false;
    int best_start = -1;
    int total_iterations = 0;
    std::vector<double> start_objectives;
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += a[k] * b[k];
    }
    return s;
}

inline void amplitudes_from_pulse(const ControlPulse& pulse, std::vector<double>& x) {
    const int m = pulse.segments();
    x.resize(static_cast<std::size_t>(2 * m));
    for (int i = 0; i < m; ++i) {
        x[static_cast<std::size_t>(i)] = pulse.omega_x_mhz[static_cast<std::size_t>(i)];
        x[static_cast<std::size_t>(m + i)] = pulse.omega_y_mhz[static_cast<std::size_t>(i)];
    }
}

inline void pulse_from_amplitudes(const std::vector<double>& x, ControlPulse& pulse) {
    const int m = pulse.segments();
    for (int i = 0; i < m; ++i) {
        pulse.omega_x_mhz[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
        pulse.omega_y_mhz[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(m + i)];
    }
    pulse.project_onto_bound();
}

}  // namespace detail

/// Multi-start projected L-BFGS ascent on the robust objective. Accepted
/// iterates never decrease the objective (backtracking line search, falling
/// back to the raw gradient direction); the best start wins, ties broken by
/// the lowest start index.
inline PulseOptimizationResult optimize_pulse(const SixLevelModel& model, const NoiseGrid& grid,
                                              const PulseOptimizerConfig& config, std::uint64_t seed) {
    grid.validate();
    if (config.segments < 1 || config.starts < 1) {
        throw std::invalid_argument("optimize_pulse: need >= 1 segment and >= 1 start");
    }

    const double total_time =
        config.total_time_us > 0.0 ? config.total_time_us : model.default_total_time_us();
    const int dim = 2 * config.segments;

    PulseOptimizationResult best;
    best.objective = -1.0;

    for (int start = 0; start < config.starts; ++start) {
        RngStream rng = stream_for(seed, static_cast<std::uint64_t>(start));
        ControlPulse pulse;
        pulse.total_time_us = total_time;
        pulse.amplitude_bound_mhz = config.amplitude_bound_mhz;
        pulse.omega_x_mhz.resize(static_cast<std::size_t>(config.segments));
        pulse.omega_y_mhz.resize(static_cast<std::size_t>(config.segments));
        const double init_scale = config.amplitude_bound_mhz / 2.0;
        for (int i = 0; i < config.segments; ++i) {
            pulse.omega_x_mhz[static_cast<std::size_t>(i)] = init_scale * (2.0 * rng.uniform() - 1.0);
            pulse.omega_y_mhz[static_cast<std::size_t>(i)] = init_scale * (2.0 * rng.uniform() - 1.0);
        }
        pulse.project_onto_bound();

        double objective = robust_objective(pulse, model, grid);
        int iterations = 0;

        if (config.amplitude_bound_mhz > 0.0) {
            std::vector<double> x;
            detail::amplitudes_from_pulse(pulse, x);
            std::vector<double> grad = robust_objective_gradient(pulse, model, grid);
            std::vector<std::vector<double>> s_hist;
            std::vector<std::vector<double>> y_hist;
            std::vector<double> rho_hist;

            for (; iterations < config.max_iterations; ++iterations) {
                if (objective >= config.stop_objective) {
                    break;
                }
                if (std::sqrt(detail::dot(grad, grad)) < config.gradient_tolerance) {
                    break;
                }

                // two-loop recursion on the ascent direction
                std::vector<double> dir = grad;
                const int hist = static_cast<int>(s_hist.size());
                std::vector<double> alpha_coef(static_cast<std::size_t>(hist));
                for (int h = hist - 1; h >= 0; --h) {
                    alpha_coef[static_cast<std::size_t>(h)] =
                        rho_hist[static_cast<std::size_t>(h)] * detail::dot(s_hist[static_cast<std::size_t>(h)], dir);
                    for (int k = 0; k < dim; ++k) {
                        dir[static_cast<std::size_t>(k)] -=
                            alpha_coef[static_cast<std::size_t>(h)] * y_hist[static_cast<std::size_t>(h)][static_cast<std::size_t>(k)];
                    }
                }
                if (hist > 0) {
                    const auto& s_last = s_hist.back();
                    const auto& y_last = y_hist.back();
                    const double gamma = detail::dot(s_last, y_last) / detail::dot(y_last, y_last);
                    for (double& v : dir) {
                        v *= gamma;
                    }
                }
                for (int h = 0; h < hist; ++h) {
                    const double beta =
                        rho_hist[static_cast<std::size_t>(h)] * detail::dot(y_hist[static_cast<std::size_t>(h)], dir);
                    for (int k = 0; k < dim; ++k) {
                        dir[static_cast<std::size_t>(k)] +=
                            (alpha_coef[static_cast<std::size_t>(h)] - beta) * s_hist[static_cast<std::size_t>(h)][static_cast<std::size_t>(k)];
                    }
                }
                if (detail::dot(dir, grad) <= 0.0) {
                    dir = grad;  // not an ascent direction; fall back
                    s_hist.clear();
                    y_hist.clear();
                    rho_hist.clear();
                }

                // backtracking line search with projection
                ControlPulse trial = pulse;
                std::vector<double> x_trial(x.size());
                double step = 1.0;
                bool improved = false;
                for (int bt = 0; bt < 60; ++bt) {
                    for (int k = 0; k < dim; ++k) {
                        x_trial[static_cast<std::size_t>(k)] =
                            x[static_cast<std::size_t>(k)] + step * dir[static_cast<std::size_t>(k)];
                    }
                    detail::pulse_from_amplitudes(x_trial, trial);
                    const double trial_objective = robust_objective(trial, model, grid);
                    if (trial_objective > objective) {
                        std::vector<double> grad_new = robust_objective_gradient(trial, model, grid);
                        std::vector<double> x_new;
                        detail::amplitudes_from_pulse(trial, x_new);
                        std::vector<double> s_vec(static_cast<std::size_t>(dim));
                        std::vector<double> y_vec(static_cast<std::size_t>(dim));
                        for (int k = 0; k < dim; ++k) {
                            s_vec[static_cast<std::size_t>(k)] =
                                x_new[static_cast<std::size_t>(k)] - x[static_cast<std::size_t>(k)];
                            // curvature pair for the equivalent minimization of -objective
                            y_vec[static_cast<std::size_t>(k)] =
                                grad[static_cast<std::size_t>(k)] - grad_new[static_cast<std::size_t>(k)];
                        }
                        if (detail::dot(s_vec, y_vec) > 1e-14) {
                            s_hist.push_back(std::move(s_vec));
                            y_hist.push_back(std::move(y_vec));
                            rho_hist.push_back(1.0 / detail::dot(s_hist.back(), y_hist.back()));
                            if (static_cast<int>(s_hist.size()) > config.lbfgs_memory) {
                                s_hist.erase(s_hist.begin());
                                y_hist.erase(y_hist.begin());
                                rho_hist.erase(rho_hist.begin());
                            }
                        }
                        pulse = trial;
                        x = std::move(x_new);
                        grad = std::move(grad_new);
                        objective = trial_objective;
                        improved = true;
                        break;
                    }
                    step *= 0.5;
                }
                if (!improved) {
                    break;
                }
            }
        }

        best.start_objectives.push_back(objective);
        best.total_iterations += iterations;
        if (objective > best.objective) {
            best.objective = objective;
            best.pulse = pulse;
            best.best_start = start;
        }
    }

    best.nominal_fidelity = gate_fidelity(pulse_propagator(best.pulse, model, 0.0, 0.0), model);
    best.reached_target = best.objective >= config.target_objective;
    return best;
}

/// Constant-amplitude reference pulse: Omega_x = 1/(2T) realizes a nominal
/// pi rotation over the full duration.
inline ControlPulse naive_square_pulse(const SixLevelModel& model, int segments = 10,
                                       double amplitude_bound_mhz = -1.0) {
    ControlPulse pulse;
    pulse.total_time_us = model.default_total_time_us();
    pulse.amplitude_bound_mhz =
        amplitude_bound_mhz > 0.0 ? amplitude_bound_mhz : model.default_amplitude_bound_mhz();
    const double amp = 1.0 / (2.0 * pulse.total_time_us);
    pulse.omega_x_mhz.assign(static_cast<std::size_t>(segments), amp);
    pulse.omega_y_mhz.assign(static_cast<std::size_t>(segments), 0.0);
    pulse.validate();
    return pulse;
}

/// Plain-text pulse record: '# key value' header lines carrying T, M, A_zz
/// and the amplitude bound, then one "omega_x_MHz omega_y_MHz" line per
/// segment.
inline void write_pulse_file(std::ostream& os, const ControlPulse& pulse, const SixLevelModel& model) {
    os << "# crookslab pulse v1\n";
    os << "# total_time_us " << format_double(pulse.total_time_us) << "\n";
    os << "# segments " << pulse.segments() << "\n";
    os << "# a_zz_mhz " << format_double(model.a_zz_mhz) << "\n";
    os << "# amplitude_bound_mhz " << format_double(pulse.amplitude_bound_mhz) << "\n";
    for (int i = 0; i < pulse.segments(); ++i) {
        os << format_double(pulse.omega_x_mhz[static_cast<std::size_t>(i)]) << " "
           << format_double(pulse.omega_y_mhz[static_cast<std::size_t>(i)]) << "\n";
    }
}

struct PulseFile {
    ControlPulse pulse;
    double a_zz_mhz = 0.0;
};

inline PulseFile read_pulse_file(std::istream& is) {
    PulseFile out;
    int declared_segments = -1;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string key;
            hs >> key;
            if (key == "total_time_us") {
                hs >> out.pulse.total_time_us;
            } else if (key == "segments") {
                hs >> declared_segments;
            } else if (key == "a_zz_mhz") {
                hs >> out.a_zz_mhz;
            } else if (key == "amplitude_bound_mhz") {
                hs >> out.pulse.amplitude_bound_mhz;
            }
            continue;
        }
        std::istringstream ls(line);
        double x = 0.0;
        double y = 0.0;
        if (!(ls >> x >> y)) {
            throw std::invalid_argument("pulse file: malformed amplitude line '" + line + "'");
        }
        out.pulse.omega_x_mhz.push_back(x);
        out.pulse.omega_y_mhz.push_back(y);
    }
    if (declared_segments >= 0 && declared_segments != out.pulse.segments()) {
        throw std::invalid_argument("pulse file: segment count does not match header");
    }
    out.pulse.validate();
    return out;
}

}  // namespace crookslab
