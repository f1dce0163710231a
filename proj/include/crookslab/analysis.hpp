#pragma once

// Effective-temperature and free-energy estimators with first-order error
// propagation, detailed fluctuation-theorem residuals and the population
// regression behind the summary table.

#include <crookslab/tpm.hpp>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace crookslab {

struct ValueWithError {
    double value = 0.0;
    double std_error = 0.0;

    double ci95_halfwidth() const { return 1.96 * std_error; }
};

struct TemperatureEstimate {
    ValueWithError forward;   ///< h*beta from forward start populations
    ValueWithError reversed;  ///< h*beta from reversed start populations
    ValueWithError average;   ///< (forward + reversed)/2
};

/// h*beta = ln(p0/p1)/gap from the first-outcome marginals of a work
/// distribution. The uncertainty treats the marginal as one binomial pair:
/// sigma = sigma_p * (1/p0 + 1/p1) / gap with sigma_p = sqrt(p0 p1 / shots).
inline ValueWithError estimate_beta(const WorkDistribution& dist, double endpoint_gap_khz) {
    if (!(endpoint_gap_khz > 0.0)) {
        throw std::invalid_argument("estimate_beta: endpoint gap must be > 0");
    }
    const double p0 = dist.marginal_start(0);
    const double p1 = dist.marginal_start(1);
    if (!(p0 > 0.0) || !(p1 > 0.0)) {
        throw std::domain_error("estimate_beta: undefined for a vanishing marginal population");
    }
    ValueWithError out;
    out.value = std::log(p0 / p1) / endpoint_gap_khz;
    if (dist.shots > 0) {
        const double sigma_p = std::sqrt(p0 * p1 / static_cast<double>(dist.shots));
        out.std_error = sigma_p * (1.0 / p0 + 1.0 / p1) / endpoint_gap_khz;
    }
    return out;
}

namespace detail {

inline double log_cosh(double x) {
    const double ax = std::abs(x);
    return ax + std::log1p(std::exp(-2.0 * ax)) - std::log(2.0);
}

}  // namespace detail

/// Free-energy difference (divided by h, in kHz) between symmetric two-level
/// spectra with gaps gap_tau and gap0:
///   dF = -ln[cosh(hb*gap_tau/2)/cosh(hb*gap0/2)] / hb,
/// continuously extended to 0 at hb = 0. Negative h_beta is accepted so the
/// estimator pipeline stays defined when a sampled population ratio lands on
/// the wrong side of 1/2 near infinite temperature.
inline double free_energy_difference(double h_beta, double gap0_khz, double gap_tau_khz) {
    if (!(gap0_khz > 0.0) || !(gap_tau_khz > 0.0)) {
        throw std::invalid_argument("free_energy_difference: gaps must be > 0");
    }
    if (!std::isfinite(h_beta)) {
        throw std::invalid_argument("free_energy_difference: h_beta must be finite");
    }
    if (h_beta == 0.0) {
        return 0.0;
    }
    return -(detail::log_cosh(h_beta * gap_tau_khz / 2.0) - detail::log_cosh(h_beta * gap0_khz / 2.0)) / h_beta;
}

/// Temperature estimate from a forward/reversed distribution pair; each
/// channel uses the gap of its own start Hamiltonian.
inline TemperatureEstimate estimate_temperature(const WorkDistribution& fwd, const WorkDistribution& rev) {
    TemperatureEstimate t;
    t.forward = estimate_beta(fwd, fwd.start_gap_khz());
    t.reversed = estimate_beta(rev, rev.start_gap_khz());
    t.average.value = (t.forward.value + t.reversed.value) / 2.0;
    t.average.std_error = 0.5 * std::hypot(t.forward.std_error, t.reversed.std_error);
    return t;
}

/// One detailed-fluctuation-theorem residual
///   delta = P^F_{ij} / P^R_{ji} - exp(hb (W_ij - dF)).
struct CftResidual {
    int i = 0;  ///< first outcome of the forward trajectory
    int j = 0;  ///< second outcome of the forward trajectory
    double work_khz = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double delta = 0.0;
    double std_error = 0.0;
    bool defined = true;  ///< false when the reverse probability vanishes
};

/// Residuals for all four trajectories. The rhs uses the averaged h*beta and
/// the free-energy difference derived from the forward distribution's
/// endpoint gaps; uncertainties propagate (P^F, P^R, h*beta) as independent,
/// with the h*beta sensitivity of dF folded in by numerical differentiation.
inline std::array<CftResidual, 4> cft_residuals(const WorkDistribution& fwd, const WorkDistribution& rev,
                                                const TemperatureEstimate& temp) {
    const double hb = temp.average.value;
    const double sigma_hb = temp.average.std_error;
    const double gap0 = fwd.start_gap_khz();
    const double gap_tau = fwd.end_gap_khz();
    const double dfree = free_energy_difference(hb, gap0, gap_tau);

    auto rhs_at = [&](double beta, double w) {
        return std::exp(beta * (w - free_energy_difference(beta, gap0, gap_tau)));
    };

    std::array<CftResidual, 4> out;
    int idx = 0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j, ++idx) {
            CftResidual r;
            r.i = i;
            r.j = j;
            r.work_khz = fwd.work_khz[i][j];
            const double pf = fwd.probability[i][j];
            const double pr = rev.probability[j][i];
            r.rhs = std::exp(hb * (r.work_khz - dfree));
            if (!(pr > 0.0)) {
                r.defined = false;
                r.lhs = 0.0;
                r.delta = 0.0;
                r.std_error = 0.0;
                out[idx] = r;
                continue;
            }
            r.lhs = pf / pr;
            r.delta = r.lhs - r.rhs;

            const double sf = fwd.std_error[i][j];
            const double sr = rev.std_error[j][i];
            const double step = 1e-6;
            const double drhs_dbeta =
                (rhs_at(hb + step, r.work_khz) - rhs_at(hb - step, r.work_khz)) / (2.0 * step);
            const double var = (sf / pr) * (sf / pr) + (pf * sr / (pr * pr)) * (pf * sr / (pr * pr)) +
                               (drhs_dbeta * sigma_hb) * (drhs_dbeta * sigma_hb);
            r.std_error = std::sqrt(var);
            out[idx] = r;
        }
    }
    return out;
}

/// One measured population row: forward start populations (p0, p1), reversed
/// start populations (q0, q1) and their common standard error.
struct PopulationRow {
    double p0 = 0.0;
    double p1 = 0.0;
    double q0 = 0.0;
    double q1 = 0.0;
    double sigma = 0.0;
};

inline double round_half_away_2dp(double x) {
    const double scaled = x * 100.0;
    return (scaled >= 0.0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5)) / 100.0;
}

/// Reproduce the per-row effective inverse temperatures from measured
/// populations; gaps default to the standard protocol endpoints.
inline std::vector<TemperatureEstimate> table1_regression(const std::vector<PopulationRow>& rows,
                                                          double gap0_khz = 2.0,
                                                          double gap_tau_khz = std::sqrt(29.0)) {
    std::vector<TemperatureEstimate> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        auto in_range = [](double p) { return p > 0.0 && p < 1.0; };
        if (!in_range(row.p0) || !in_range(row.p1) || !in_range(row.q0) || !in_range(row.q1) ||
            std::abs(row.p0 + row.p1 - 1.0) > 1e-9 || std::abs(row.q0 + row.q1 - 1.0) > 1e-9) {
            throw std::invalid_argument("table1_regression: populations must be complementary pairs in (0,1)");
        }
        TemperatureEstimate t;
        t.forward.value = std::log(row.p0 / row.p1) / gap0_khz;
        t.forward.std_error = row.sigma * (1.0 / row.p0 + 1.0 / row.p1) / gap0_khz;
        t.reversed.value = std::log(row.q0 / row.q1) / gap_tau_khz;
        t.reversed.std_error = row.sigma * (1.0 / row.q0 + 1.0 / row.q1) / gap_tau_khz;
        t.average.value = (t.forward.value + t.reversed.value) / 2.0;
        t.average.std_error = 0.5 * std::hypot(t.forward.std_error, t.reversed.std_error);
        out.push_back(t);
    }
    return out;
}

}  // namespace crookslab
