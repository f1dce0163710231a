#pragma once

// Two-point measurement protocol: thermal preparation, projective
// measurement in the start eigenbasis, unitary switching, projective
// measurement in the end eigenbasis. Exact (density-matrix) mode and a
// shot-by-shot Monte Carlo mode with an imperfect-measurement model.

#include <crookslab/linalg.hpp>
#include <crookslab/rng.hpp>
#include <crookslab/switching.hpp>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

namespace crookslab {

/// Two independent projective-measurement failure modes: the recorded
/// outcome is misassigned with probability epsilon, and the post-measurement
/// state is replaced by the other eigenstate with probability d.
struct MeasurementModel {
    double misassign_prob = 0.0;   ///< epsilon in [0, 1/2)
    double demolition_prob = 0.0;  ///< d in [0, 1]

    static MeasurementModel ideal() { return {}; }
    bool is_ideal() const { return misassign_prob == 0.0 && demolition_prob == 0.0; }

    void validate() const {
        if (!(misassign_prob >= 0.0) || !(misassign_prob < 0.5)) {
            throw std::invalid_argument("MeasurementModel: misassign_prob must lie in [0, 0.5)");
        }
        if (!(demolition_prob >= 0.0) || !(demolition_prob <= 1.0)) {
            throw std::invalid_argument("MeasurementModel: demolition_prob must lie in [0, 1]");
        }
    }
};

/// Shot counts over the four (first outcome, second outcome) trajectories.
struct TrajectoryCounts {
    std::array<std::array<std::uint64_t, 2>, 2> counts{{{0, 0}, {0, 0}}};
    std::uint64_t shots = 0;

    std::uint64_t total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
};

enum class DistributionSource { exact, monte_carlo };

/// Work statistics over the four trajectories (i -> j), indexed by the
/// ascending-energy eigenstate labels of the start and end Hamiltonians.
struct WorkDistribution {
    std::array<std::array<double, 2>, 2> work_khz{};
    std::array<std::array<double, 2>, 2> probability{};
    std::array<std::array<double, 2>, 2> std_error{};
    DistributionSource source = DistributionSource::exact;
    std::uint64_t shots = 0;  ///< 0 in exact mode

    /// Marginal probability of first outcome i.
    double marginal_start(int i) const { return probability[i][0] + probability[i][1]; }
    /// Start-spectrum gap E1 - E0 in kHz, reconstructed from the work values.
    double start_gap_khz() const { return work_khz[0][0] - work_khz[1][0]; }
    /// End-spectrum gap E1 - E0 in kHz.
    double end_gap_khz() const { return work_khz[0][1] - work_khz[0][0]; }
};

/// Start/end spectral data and the switching propagator of a protocol.
struct TpmEndpoints {
    SpectralDecomposition start;
    SpectralDecomposition end;
    Operator u;
};

inline TpmEndpoints tpm_endpoints(const SwitchingProtocol& p, int slices = 4000) {
    p.validate();
    TpmEndpoints e;
    e.start = eig_hermitian(hamiltonian_at(p, 0.0));
    e.end = eig_hermitian(hamiltonian_at(p, p.tau_us));
    e.u = protocol_propagator(p, slices);
    return e;
}

/// Gibbs populations of a two-level spectrum at inverse temperature h*beta.
inline std::array<double, 2> gibbs_populations(const SpectralDecomposition& spec, double h_beta) {
    if (!(h_beta >= 0.0) || !std::isfinite(h_beta)) {
        throw std::invalid_argument("gibbs_populations: h_beta must be finite and >= 0");
    }
    if (spec.dim() != 2) {
        throw std::invalid_argument("gibbs_populations: expected a two-level spectrum");
    }
    // weights relative to the ground level keep large h_beta finite
    const double w1 = std::exp(-h_beta * spec.gap(0, 1));
    return {1.0 / (1.0 + w1), w1 / (1.0 + w1)};
}

namespace detail {

inline std::array<std::array<double, 2>, 2> transition_probabilities(const TpmEndpoints& e) {
    std::array<std::array<double, 2>, 2> t{};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const Complex amp = (e.end.vectors.col(j).adjoint() * e.u * e.start.vectors.col(i))(0, 0);
            t[i][j] = std::norm(amp);
        }
    }
    return t;
}

inline std::array<std::array<double, 2>, 2> work_values(const TpmEndpoints& e) {
    std::array<std::array<double, 2>, 2> w{};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            w[i][j] = e.end.energies[j] - e.start.energies[i];
        }
    }
    return w;
}

}  // namespace detail

/// Exact trajectory probabilities P_ij = p_i |<v_j^end| U |v_i^start>|^2.
inline WorkDistribution exact_work_distribution(const SwitchingProtocol& p, double h_beta, int slices = 4000) {
    const TpmEndpoints e = tpm_endpoints(p, slices);
    const std::array<double, 2> pops = gibbs_populations(e.start, h_beta);
    const auto t = detail::transition_probabilities(e);

    WorkDistribution d;
    d.work_khz = detail::work_values(e);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            d.probability[i][j] = pops[i] * t[i][j];
            d.std_error[i][j] = 0.0;
        }
    }
    d.source = DistributionSource::exact;
    d.shots = 0;
    return d;
}

/// Shot-by-shot TPM simulation. Per shot: sample the initial eigenstate from
/// the Gibbs populations, apply the (possibly imperfect) first measurement,
/// evolve the post-measurement eigenstate with the switching propagator,
/// Born-sample the second outcome and apply record misassignment. Counts are
/// bit-identical for a given seed regardless of the thread count.
inline TrajectoryCounts monte_carlo_tpm(const SwitchingProtocol& p, double h_beta, std::uint64_t shots,
                                        const MeasurementModel& model, std::uint64_t seed, int slices = 4000,
                                        int threads = 1) {
    model.validate();
    if (shots < 1) {
        throw std::invalid_argument("monte_carlo_tpm: shots must be >= 1");
    }
    if (threads < 1) {
        threads = 1;
    }

    const TpmEndpoints e = tpm_endpoints(p, slices);
    const std::array<double, 2> pops = gibbs_populations(e.start, h_beta);

    // Only two post-measurement states are possible; precompute their evolved
    // Born weights for the end ground state.
    std::array<double, 2> born0{};
    for (int s = 0; s < 2; ++s) {
        const StateVector psi = e.u * e.start.vectors.col(s);
        const double p0 = std::norm((e.end.vectors.col(0).adjoint() * psi)(0, 0));
        const double p1 = std::norm((e.end.vectors.col(1).adjoint() * psi)(0, 0));
        born0[s] = p0 / (p0 + p1);
    }

    const double eps = model.misassign_prob;
    const double dem = model.demolition_prob;

    auto run_range = [&](std::uint64_t lo, std::uint64_t hi, TrajectoryCounts& out) {
        for (std::uint64_t s = lo; s < hi; ++s) {
            RngStream r = stream_for(seed, s);
            const double u_init = r.uniform();
            const double u_mis1 = r.uniform();
            const double u_dem = r.uniform();
            const double u_born = r.uniform();
            const double u_mis2 = r.uniform();

            int state = (u_init < pops[0]) ? 0 : 1;
            int rec1 = state;
            if (u_mis1 < eps) {
                rec1 ^= 1;
            }
            if (u_dem < dem) {
                state ^= 1;
            }
            int outcome = (u_born < born0[state]) ? 0 : 1;
            if (u_mis2 < eps) {
                outcome ^= 1;
            }
            ++out.counts[rec1][outcome];
        }
    };

    TrajectoryCounts total;
    total.shots = shots;
    if (threads == 1) {
        run_range(0, shots, total);
        return total;
    }

    const std::uint64_t nthreads = std::min<std::uint64_t>(static_cast<std::uint64_t>(threads), shots);
    std::vector<TrajectoryCounts> partial(nthreads);
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    const std::uint64_t chunk = (shots + nthreads - 1) / nthreads;
    for (std::uint64_t t = 0; t < nthreads; ++t) {
        const std::uint64_t lo = t * chunk;
        const std::uint64_t hi = std::min(shots, lo + chunk);
        pool.emplace_back([&, lo, hi, t] { run_range(lo, hi, partial[t]); });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (const auto& c : partial) {
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                total.counts[i][j] += c.counts[i][j];
            }
        }
    }
    return total;
}

/// Empirical work distribution from trajectory counts, with binomial
/// standard errors and work values from the protocol's endpoint spectra.
inline WorkDistribution counts_to_distribution(const TrajectoryCounts& c, const SwitchingProtocol& p) {
    if (c.shots == 0) {
        throw std::invalid_argument("counts_to_distribution: zero shots");
    }
    if (c.total() != c.shots) {
        throw std::invalid_argument("counts_to_distribution: counts do not sum to shots");
    }
    p.validate();
    TpmEndpoints e;
    e.start = eig_hermitian(hamiltonian_at(p, 0.0));
    e.end = eig_hermitian(hamiltonian_at(p, p.tau_us));

    WorkDistribution d;
    d.work_khz = detail::work_values(e);
    const double n = static_cast<double>(c.shots);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double f = static_cast<double>(c.counts[i][j]) / n;
            d.probability[i][j] = f;
            d.std_error[i][j] = std::sqrt(f * (1.0 - f) / n);
        }
    }
    d.source = DistributionSource::monte_carlo;
    d.shots = c.shots;
    return d;
}

}  // namespace crookslab
