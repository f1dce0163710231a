#pragma once

// Statistical simulator of repetitive single-shot readout: a nuclear-spin-
// conditioned fluorescence cycle repeated N times per shot, photon-count
// histograms with a two-Poisson threshold fit, telegraph traces with nuclear
// flips, and the plateau-based fidelity estimator.

#include <crookslab/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace crookslab {

enum class NuclearState { in_minus_one, other };

inline NuclearState flipped(NuclearState s) {
    return s == NuclearState::in_minus_one ? NuclearState::other : NuclearState::in_minus_one;
}

struct ReadoutModel {
    int reps = 1500;                  ///< conditional-flip + fluorescence cycles per shot
    double lambda_bright = 0.02;      ///< mean photons per rep, electron bright
    double lambda_dark = 0.012;       ///< mean photons per rep, electron dark
    double flip_prob_per_rep = 0.0;   ///< nuclear flip probability per rep
    double pi_pulse_error = 0.0;      ///< probability the selective flip misfires in one rep

    void validate() const {
        if (reps < 1) {
            throw std::invalid_argument("ReadoutModel: reps must be >= 1");
        }
        if (!(lambda_bright > lambda_dark) || !(lambda_dark >= 0.0)) {
            throw std::invalid_argument("ReadoutModel: need lambda_bright > lambda_dark >= 0");
        }
        if (!(flip_prob_per_rep >= 0.0) || !(flip_prob_per_rep <= 1.0) || !(pi_pulse_error >= 0.0) ||
            !(pi_pulse_error <= 1.0)) {
            throw std::invalid_argument("ReadoutModel: probabilities must lie in [0, 1]");
        }
    }

    /// Equal-contrast variant used by zero-contrast diagnostics; skips the
    /// bright > dark requirement.
    void validate_allow_zero_contrast() const {
        if (reps < 1 || !(lambda_bright >= lambda_dark) || !(lambda_dark >= 0.0)) {
            throw std::invalid_argument("ReadoutModel: invalid rates");
        }
    }
};

struct ShotResult {
    int photon_count = 0;
    NuclearState post_state = NuclearState::other;
};

/// One accumulated single-shot readout: per rep the fluorescence is dark
/// when (state is |-1>n) XOR (the selective pulse misfires); the photon
/// count is Poissonian and the nuclear state may flip after each rep.
inline ShotResult single_shot(const ReadoutModel& model, NuclearState initial, RngStream& rng) {
    model.validate_allow_zero_contrast();
    NuclearState state = initial;
    int total = 0;
    for (int rep = 0; rep < model.reps; ++rep) {
        bool dark = (state == NuclearState::in_minus_one);
        if (model.pi_pulse_error > 0.0 && rng.bernoulli(model.pi_pulse_error)) {
            dark = !dark;
        }
        total += rng.poisson(dark ? model.lambda_dark : model.lambda_bright);
        if (model.flip_prob_per_rep > 0.0 && rng.bernoulli(model.flip_prob_per_rep)) {
            state = flipped(state);
        }
    }
    return {total, state};
}

inline ShotResult single_shot(const ReadoutModel& model, NuclearState initial, std::uint64_t seed) {
    RngStream rng = stream_for(seed, 0);
    return single_shot(model, initial, rng);
}

/// Poisson CDF P(X <= k) by direct stable summation (means here are < ~100).
inline double poisson_cdf(double lambda, int k) {
    if (k < 0) {
        return 0.0;
    }
    double pmf = std::exp(-lambda);
    double cdf = pmf;
    for (int i = 1; i <= k; ++i) {
        pmf *= lambda / static_cast<double>(i);
        cdf += pmf;
    }
    return std::min(cdf, 1.0);
}

/// Total misclassification probability when counts <= threshold are labelled
/// "dark" under a two-Poisson mixture.
inline double misclassification_probability(int threshold, double mean_dark, double mean_bright,
                                            double weight_dark) {
    const double miss_dark = 1.0 - poisson_cdf(mean_dark, threshold);
    const double miss_bright = poisson_cdf(mean_bright, threshold);
    return weight_dark * miss_dark + (1.0 - weight_dark) * miss_bright;
}

struct ThresholdFit {
    bool defined = false;
    int threshold = 0;
    double mean_dark = 0.0;    ///< fitted total-count mean of the dark mode
    double mean_bright = 0.0;  ///< fitted total-count mean of the bright mode
    double weight_dark = 0.0;
    double expected_misclassification = 0.0;
    std::string method = "two-poisson EM, exhaustive integer threshold";
    std::string diagnostic;
};

struct PhotonHistogram {
    std::vector<std::uint64_t> frequency;  ///< index = photon count
    std::uint64_t trials = 0;
    ThresholdFit fit;

    std::uint64_t count_at(std::size_t k) const { return k < frequency.size() ? frequency[k] : 0; }
};

namespace detail {

/// Two-Poisson mixture fit by EM on the binned counts, then the integer
/// threshold minimizing total misclassification. Unimodal data (separation
/// under two sigma or a vanishing mixture weight) is reported as undefined.
inline ThresholdFit fit_threshold(const std::vector<std::uint64_t>& freq, std::uint64_t trials) {
    ThresholdFit fit;
    if (trials == 0) {
        fit.diagnostic = "no data";
        return fit;
    }

    double mean = 0.0;
    for (std::size_t k = 0; k < freq.size(); ++k) {
        mean += static_cast<double>(k) * static_cast<double>(freq[k]);
    }
    mean /= static_cast<double>(trials);

    // moment-based init: means of the two halves split at the overall mean
    double lo_sum = 0.0;
    double lo_n = 0.0;
    double hi_sum = 0.0;
    double hi_n = 0.0;
    for (std::size_t k = 0; k < freq.size(); ++k) {
        if (static_cast<double>(k) <= mean) {
            lo_sum += static_cast<double>(k) * static_cast<double>(freq[k]);
            lo_n += static_cast<double>(freq[k]);
        } else {
            hi_sum += static_cast<double>(k) * static_cast<double>(freq[k]);
            hi_n += static_cast<double>(freq[k]);
        }
    }
    double mu0 = lo_n > 0.0 ? lo_sum / lo_n : mean * 0.5;
    double mu1 = hi_n > 0.0 ? hi_sum / hi_n : mean * 1.5;
    if (mu0 > mu1) {
        std::swap(mu0, mu1);
    }
    double w0 = 0.5;

    auto log_pmf = [](double lambda, double k) {
        if (lambda <= 0.0) {
            return k == 0.0 ? 0.0 : -1e300;
        }
        return k * std::log(lambda) - lambda - std::lgamma(k + 1.0);
    };

    for (int iter = 0; iter < 400; ++iter) {
        double r_sum = 0.0;
        double rk_sum = 0.0;
        double n_sum = 0.0;
        double nk_sum = 0.0;
        for (std::size_t k = 0; k < freq.size(); ++k) {
            if (freq[k] == 0) {
                continue;
            }
            const double kk = static_cast<double>(k);
            const double l0 = std::log(std::max(w0, 1e-300)) + log_pmf(mu0, kk);
            const double l1 = std::log(std::max(1.0 - w0, 1e-300)) + log_pmf(mu1, kk);
            const double m = std::max(l0, l1);
            const double p0 = std::exp(l0 - m);
            const double p1 = std::exp(l1 - m);
            const double r = p0 / (p0 + p1);
            const double n = static_cast<double>(freq[k]);
            r_sum += r * n;
            rk_sum += r * n * kk;
            n_sum += (1.0 - r) * n;
            nk_sum += (1.0 - r) * n * kk;
        }
        const double new_w0 = r_sum / static_cast<double>(trials);
        const double new_mu0 = r_sum > 0.0 ? rk_sum / r_sum : mu0;
        const double new_mu1 = n_sum > 0.0 ? nk_sum / n_sum : mu1;
        const double change = std::abs(new_w0 - w0) + std::abs(new_mu0 - mu0) + std::abs(new_mu1 - mu1);
        w0 = new_w0;
        mu0 = new_mu0;
        mu1 = new_mu1;
        if (change < 1e-12) {
            break;
        }
    }
    if (mu0 > mu1) {
        std::swap(mu0, mu1);
        w0 = 1.0 - w0;
    }

    fit.mean_dark = mu0;
    fit.mean_bright = mu1;
    fit.weight_dark = w0;

    const double separation = (mu1 - mu0) / std::sqrt(std::max(mu1, 1e-12));
    if (separation < 2.0) {
        fit.diagnostic = "modes separated by less than two sigma; histogram effectively unimodal";
        return fit;
    }
    if (std::min(w0, 1.0 - w0) < 0.02) {
        fit.diagnostic = "one mixture component carries under 2% weight";
        return fit;
    }

    int best_t = static_cast<int>(mu0);
    double best_miss = 2.0;
    for (int t = static_cast<int>(std::floor(mu0)); t <= static_cast<int>(std::ceil(mu1)); ++t) {
        const double miss = misclassification_probability(t, mu0, mu1, w0);
        if (miss < best_miss) {
            best_miss = miss;
            best_t = t;
        }
    }
    fit.defined = true;
    fit.threshold = best_t;
    fit.expected_misclassification = best_miss;
    return fit;
}

}  // namespace detail

/// Histogram of `trials` independent single shots whose initial state is
/// |-1>n with probability `initial_minus_one_prob`, plus the fitted
/// classification threshold (fit requires >= 1000 trials).
inline PhotonHistogram readout_histogram(const ReadoutModel& model, std::uint64_t trials,
                                         double initial_minus_one_prob, std::uint64_t seed) {
    model.validate_allow_zero_contrast();
    if (trials < 1) {
        throw std::invalid_argument("readout_histogram: trials must be >= 1");
    }
    if (!(initial_minus_one_prob >= 0.0) || !(initial_minus_one_prob <= 1.0)) {
        throw std::invalid_argument("readout_histogram: mixture probability must lie in [0, 1]");
    }

    PhotonHistogram hist;
    hist.trials = trials;
    for (std::uint64_t t = 0; t < trials; ++t) {
        RngStream rng = stream_for(seed, t);
        const NuclearState initial =
            rng.bernoulli(initial_minus_one_prob) ? NuclearState::in_minus_one : NuclearState::other;
        const ShotResult shot = single_shot(model, initial, rng);
        if (static_cast<std::size_t>(shot.photon_count) >= hist.frequency.size()) {
            hist.frequency.resize(static_cast<std::size_t>(shot.photon_count) + 1, 0);
        }
        ++hist.frequency[static_cast<std::size_t>(shot.photon_count)];
    }
    if (trials >= 1000) {
        hist.fit = detail::fit_threshold(hist.frequency, trials);
    } else {
        hist.fit.diagnostic = "threshold fit needs >= 1000 trials";
    }
    return hist;
}

struct TelegraphPoint {
    int photon_count = 0;
    NuclearState true_state = NuclearState::other;  ///< state at the start of the shot
};

struct TelegraphTrace {
    std::vector<TelegraphPoint> points;
    int threshold = 0;

    NuclearState classified(std::size_t idx) const {
        return points[idx].photon_count <= threshold ? NuclearState::in_minus_one : NuclearState::other;
    }
};

/// Consecutive single shots with the nuclear state carried between points.
inline TelegraphTrace telegraph_trace(const ReadoutModel& model, std::uint64_t n_points, NuclearState initial,
                                      int threshold, std::uint64_t seed) {
    model.validate_allow_zero_contrast();
    if (n_points < 1) {
        throw std::invalid_argument("telegraph_trace: need >= 1 point");
    }
    TelegraphTrace trace;
    trace.threshold = threshold;
    trace.points.reserve(n_points);
    NuclearState state = initial;
    for (std::uint64_t idx = 0; idx < n_points; ++idx) {
        RngStream rng = stream_for(seed, idx);
        const ShotResult shot = single_shot(model, state, rng);
        trace.points.push_back({shot.photon_count, state});
        state = shot.post_state;
    }
    return trace;
}

struct FidelityEstimate {
    double f = 0.0;
    double f0 = 0.0;  ///< per-state fidelity of the |-1>n label
    double f1 = 0.0;  ///< per-state fidelity of the other label
    double nbar0 = 0.0;
    double nbar1 = 0.0;
    std::size_t plateaus0 = 0;
    std::size_t plateaus1 = 0;
    bool low_confidence = false;  ///< set when the trace never switches label
};

/// Plateau-based readout fidelity: the classified trace is segmented into
/// maximal constant-label runs; nbar0/nbar1 are the mean run lengths of the
/// two labels and F = 1 - (1/(2 nbar0) + 1/(2 nbar1))/2, with per-state
/// values from F^2 = 1 - 1/nbar. A trace with no transitions yields the
/// whole-length limit flagged low-confidence.
inline FidelityEstimate estimate_fidelity(const TelegraphTrace& trace, std::size_t min_plateaus = 5) {
    if (trace.points.empty()) {
        throw std::invalid_argument("estimate_fidelity: empty trace");
    }

    std::vector<double> runs0;
    std::vector<double> runs1;
    NuclearState label = trace.classified(0);
    double run = 1.0;
    for (std::size_t i = 1; i < trace.points.size(); ++i) {
        const NuclearState next = trace.classified(i);
        if (next == label) {
            run += 1.0;
        } else {
            (label == NuclearState::in_minus_one ? runs0 : runs1).push_back(run);
            label = next;
            run = 1.0;
        }
    }
    (label == NuclearState::in_minus_one ? runs0 : runs1).push_back(run);

    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) {
            s += x;
        }
        return s / static_cast<double>(v.size());
    };
    auto per_state_f = [](double nbar) { return nbar > 1.0 ? std::sqrt(1.0 - 1.0 / nbar) : 0.0; };

    FidelityEstimate est;
    if (runs0.size() + runs1.size() == 1) {
        const double n = static_cast<double>(trace.points.size());
        est.nbar0 = est.nbar1 = n;
        est.plateaus0 = runs0.size();
        est.plateaus1 = runs1.size();
        est.f = 1.0 - 0.5 * (1.0 / (2.0 * n) + 1.0 / (2.0 * n));
        est.f0 = est.f1 = per_state_f(n);
        est.low_confidence = true;
        return est;
    }
    if (runs0.size() < min_plateaus || runs1.size() < min_plateaus) {
        throw std::domain_error("estimate_fidelity: fewer than the required plateaus of each kind");
    }

    est.nbar0 = mean(runs0);
    est.nbar1 = mean(runs1);
    est.plateaus0 = runs0.size();
    est.plateaus1 = runs1.size();
    est.f = 1.0 - 0.5 * (1.0 / (2.0 * est.nbar0) + 1.0 / (2.0 * est.nbar1));
    est.f0 = per_state_f(est.nbar0);
    est.f1 = per_state_f(est.nbar1);
    return est;
}

}  // namespace crookslab
