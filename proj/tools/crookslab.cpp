// crookslab command-line front end: experiment orchestration and emission
// of machine-readable results (work distributions, residual tables, Gamma
// sweeps, pulse files, readout histograms) as one directory per run with a
// manifest. All numeric artifacts are byte-reproducible for a given config
// and seed, independent of the thread count.

#include <crookslab/analysis.hpp>
#include <crookslab/config.hpp>
#include <crookslab/format.hpp>
#include <crookslab/pulse.hpp>
#include <crookslab/readout.hpp>
#include <crookslab/rng.hpp>
#include <crookslab/switching.hpp>
#include <crookslab/tpm.hpp>
#include <crookslab/version.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace crookslab;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config_error = 2;
constexpr int exit_numerical_failure = 3;

struct NumericalFailure : std::runtime_error {
    explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

/// Collects artifacts for one run directory and finishes with manifest.json.
class RunEmitter {
public:
    RunEmitter(fs::path out_dir, std::string command, std::uint64_t seed, int threads)
        : out_dir_(std::move(out_dir)), command_(std::move(command)), seed_(seed), threads_(threads) {
        fs::create_directories(out_dir_);
    }

    void write(const std::string& name, const std::string& content) {
        std::ofstream os(out_dir_ / name, std::ios::binary);
        if (!os) {
            throw NumericalFailure("cannot write " + (out_dir_ / name).string());
        }
        os << content;
        artifacts_.push_back({name, fnv1a64_hex(content)});
    }

    void finish(const json& config_snapshot) {
        json manifest;
        manifest["schema_version"] = 1;
        manifest["tool"] = "crookslab";
        manifest["version"] = version_string;
        manifest["command"] = command_;
        manifest["master_seed"] = seed_;
        manifest["rng_algorithm"] = rng_algorithm_name;
        manifest["threads"] = threads_;
        manifest["timestamp_utc"] = utc_timestamp();
        manifest["config"] = config_snapshot;
        json files = json::array();
        for (const auto& [name, hash] : artifacts_) {
            files.push_back({{"path", name}, {"fnv1a64", hash}});
        }
        manifest["artifacts"] = files;
        std::ofstream os(out_dir_ / "manifest.json", std::ios::binary);
        os << manifest.dump(2) << "\n";
    }

    const fs::path& dir() const { return out_dir_; }

private:
    fs::path out_dir_;
    std::string command_;
    std::uint64_t seed_;
    int threads_;
    std::vector<std::pair<std::string, std::string>> artifacts_;
};

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = unset, resolve via env then default 1

    int resolved_threads() const {
        if (threads > 0) {
            return threads;
        }
        if (const char* env = std::getenv("CROOKS_LAB_THREADS")) {
            try {
                std::size_t used = 0;
                const int t = std::stoi(env, &used);
                if (used != std::string(env).size() || t < 1) {
                    throw std::invalid_argument("bad");
                }
                return t;
            } catch (const std::exception&) {
                throw ConfigError(std::string("CROOKS_LAB_THREADS: invalid thread count '") + env + "'");
            }
        }
        return 1;
    }

    Config load_config() const {
        if (config_path.empty()) {
            return Config::parse_string("", "<defaults>");
        }
        return Config::parse_file(config_path);
    }
};

void add_common_options(CLI::App* cmd, CommonOptions& opts, const std::string& default_out) {
    cmd->add_option("--config", opts.config_path, "TOML-style configuration file");
    cmd->add_option("--seed", opts.seed, "master seed (default 1)");
    cmd->add_option("--out", opts.out_dir, "output directory (default " + default_out + ")")
        ->default_val(default_out);
    cmd->add_option("--threads", opts.threads, "worker threads (default: CROOKS_LAB_THREADS or 1)");
}

// ---------------------------------------------------------------------------
// tpm
// ---------------------------------------------------------------------------

struct TpmSettings {
    std::vector<double> tau_us{25.0, 50.0, 100.0, 200.0, 300.0};
    std::vector<double> h_beta{0.22};
    std::uint64_t shots = 16000;
    int slices = 4000;
    double z0_khz = 2.0;
    double x_max_khz = 5.0;
    double misassign_prob = 0.0;
    double demolition_prob = 0.0;
    double acceptance_probability = 0.054;
    std::string mode = "exact";  // exact | mc | both

    static TpmSettings from(const Config& cfg) {
        TpmSettings s;
        s.tau_us = cfg.get_double_list("tpm.tau_us", s.tau_us);
        s.h_beta = cfg.get_double_list("tpm.h_beta", s.h_beta);
        const long long shots = cfg.get_int("tpm.shots", static_cast<long long>(s.shots));
        const long long slices = cfg.get_int("tpm.slices", s.slices);
        s.z0_khz = cfg.get_double("protocol.z0_khz", s.z0_khz);
        s.x_max_khz = cfg.get_double("protocol.x_max_khz", s.x_max_khz);
        s.misassign_prob = cfg.get_double("tpm.misassign_prob", s.misassign_prob);
        s.demolition_prob = cfg.get_double("tpm.demolition_prob", s.demolition_prob);
        s.acceptance_probability = cfg.get_double("tpm.acceptance_probability", s.acceptance_probability);
        s.mode = cfg.get_string("tpm.mode", s.mode);

        if (s.tau_us.empty()) {
            throw ConfigError("tpm.tau_us: need at least one switching time");
        }
        for (double t : s.tau_us) {
            if (!(t > 0.0)) {
                throw ConfigError("tpm.tau_us: switching times must be > 0");
            }
        }
        for (double b : s.h_beta) {
            if (!(b >= 0.0)) {
                throw ConfigError("tpm.h_beta: inverse temperatures must be >= 0");
            }
        }
        if (s.mode != "exact" && s.mode != "mc" && s.mode != "both") {
            throw ConfigError("tpm.mode: expected exact, mc or both");
        }
        if ((s.mode == "mc" || s.mode == "both") && shots < 1) {
            throw ConfigError("tpm.shots: Monte Carlo mode needs shots >= 1");
        }
        if (slices < 1) {
            throw ConfigError("tpm.slices: need >= 1");
        }
        if (!(s.misassign_prob >= 0.0) || !(s.misassign_prob < 0.5)) {
            throw ConfigError("tpm.misassign_prob: must lie in [0, 0.5)");
        }
        if (!(s.demolition_prob >= 0.0) || !(s.demolition_prob <= 1.0)) {
            throw ConfigError("tpm.demolition_prob: must lie in [0, 1]");
        }
        if (!(s.acceptance_probability > 0.0) || !(s.acceptance_probability <= 1.0)) {
            throw ConfigError("tpm.acceptance_probability: must lie in (0, 1]");
        }
        s.shots = static_cast<std::uint64_t>(shots);
        s.slices = static_cast<int>(slices);
        return s;
    }

    json snapshot() const {
        return json{{"tau_us", tau_us},
                    {"h_beta", h_beta},
                    {"shots", shots},
                    {"slices", slices},
                    {"z0_khz", z0_khz},
                    {"x_max_khz", x_max_khz},
                    {"misassign_prob", misassign_prob},
                    {"demolition_prob", demolition_prob},
                    {"acceptance_probability", acceptance_probability},
                    {"mode", mode}};
    }
};

json distribution_to_json(const WorkDistribution& d) {
    json cells = json::array();
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            cells.push_back({{"i", i},
                             {"j", j},
                             {"work_khz", d.work_khz[i][j]},
                             {"probability", d.probability[i][j]},
                             {"std_error", d.std_error[i][j]},
                             {"ci95", 1.96 * d.std_error[i][j]}});
        }
    }
    return json{{"source", d.source == DistributionSource::exact ? "exact" : "monte_carlo"},
                {"shots", d.shots},
                {"trajectories", cells}};
}

void append_distribution_rows(std::ostringstream& csv, const std::string& mode, double tau, double hbeta,
                              const std::string& direction, const WorkDistribution& d) {
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            csv << mode << ',' << format_double(tau) << ',' << format_double(hbeta) << ',' << direction << ','
                << i << ',' << j << ',' << format_double(d.work_khz[i][j]) << ','
                << format_double(d.probability[i][j]) << ',' << format_double(d.std_error[i][j]) << ','
                << format_double(1.96 * d.std_error[i][j]) << '\n';
        }
    }
}

int run_tpm(const CommonOptions& common, const std::string& mode_override) {
    const Config cfg = common.load_config();
    TpmSettings s = TpmSettings::from(cfg);
    if (!mode_override.empty()) {
        if (mode_override != "exact" && mode_override != "mc" && mode_override != "both") {
            throw ConfigError("--mode: expected exact, mc or both");
        }
        s.mode = mode_override;
        if (s.mode != "exact" && s.shots < 1) {
            throw ConfigError("tpm.shots: Monte Carlo mode needs shots >= 1");
        }
    }
    const int threads = common.resolved_threads();
    RunEmitter emitter(common.out_dir, "tpm", common.seed, threads);

    MeasurementModel model;
    model.misassign_prob = s.misassign_prob;
    model.demolition_prob = s.demolition_prob;
    model.validate();

    const bool do_exact = s.mode == "exact" || s.mode == "both";
    const bool do_mc = s.mode == "mc" || s.mode == "both";

    std::ostringstream dist_csv;
    dist_csv << "mode,tau_us,h_beta,direction,i,j,work_khz,probability,std_error,ci95\n";
    std::ostringstream temp_csv;
    temp_csv << "mode,tau_us,h_beta,h_beta_f,sigma_f,h_beta_r,sigma_r,h_beta_avg,sigma_avg,delta_f_khz\n";
    std::ostringstream res_csv;
    res_csv << "mode,tau_us,h_beta,i,j,work_khz,lhs,rhs,delta,std_error,ci95,defined\n";

    json cells = json::array();

    for (std::size_t ti = 0; ti < s.tau_us.size(); ++ti) {
        SwitchingProtocol fwd;
        fwd.z0_khz = s.z0_khz;
        fwd.x_max_khz = s.x_max_khz;
        fwd.tau_us = s.tau_us[ti];
        const SwitchingProtocol rev = fwd.reversed();

        for (std::size_t hi = 0; hi < s.h_beta.size(); ++hi) {
            const double hbeta = s.h_beta[hi];
            json cell;
            cell["tau_us"] = fwd.tau_us;
            cell["h_beta"] = hbeta;
            cell["expected_attempts"] =
                static_cast<std::uint64_t>(std::ceil(static_cast<double>(s.shots) / s.acceptance_probability));

            auto analyze = [&](const std::string& mode_name, const WorkDistribution& df,
                               const WorkDistribution& dr) {
                append_distribution_rows(dist_csv, mode_name, fwd.tau_us, hbeta, "forward", df);
                append_distribution_rows(dist_csv, mode_name, fwd.tau_us, hbeta, "reversed", dr);
                const TemperatureEstimate temp = estimate_temperature(df, dr);
                const double dfree =
                    free_energy_difference(temp.average.value, df.start_gap_khz(), df.end_gap_khz());
                temp_csv << mode_name << ',' << format_double(fwd.tau_us) << ',' << format_double(hbeta) << ','
                         << format_double(temp.forward.value) << ',' << format_double(temp.forward.std_error)
                         << ',' << format_double(temp.reversed.value) << ','
                         << format_double(temp.reversed.std_error) << ',' << format_double(temp.average.value)
                         << ',' << format_double(temp.average.std_error) << ',' << format_double(dfree) << '\n';
                const auto residuals = cft_residuals(df, dr, temp);
                json res_json = json::array();
                for (const auto& r : residuals) {
                    res_csv << mode_name << ',' << format_double(fwd.tau_us) << ',' << format_double(hbeta)
                            << ',' << r.i << ',' << r.j << ',' << format_double(r.work_khz) << ','
                            << format_double(r.lhs) << ',' << format_double(r.rhs) << ','
                            << format_double(r.delta) << ',' << format_double(r.std_error) << ','
                            << format_double(1.96 * r.std_error) << ',' << (r.defined ? 1 : 0) << '\n';
                    res_json.push_back({{"i", r.i},
                                        {"j", r.j},
                                        {"work_khz", r.work_khz},
                                        {"lhs", r.lhs},
                                        {"rhs", r.rhs},
                                        {"delta", r.delta},
                                        {"std_error", r.std_error},
                                        {"ci95", 1.96 * r.std_error},
                                        {"defined", r.defined}});
                }
                json block;
                block["forward"] = distribution_to_json(df);
                block["reversed"] = distribution_to_json(dr);
                block["temperature"] = {{"h_beta_f", temp.forward.value},
                                        {"sigma_f", temp.forward.std_error},
                                        {"h_beta_r", temp.reversed.value},
                                        {"sigma_r", temp.reversed.std_error},
                                        {"h_beta_avg", temp.average.value},
                                        {"sigma_avg", temp.average.std_error}};
                block["delta_f_khz"] = dfree;
                block["residuals"] = res_json;
                cell[mode_name] = block;
            };

            if (do_exact) {
                analyze("exact", exact_work_distribution(fwd, hbeta, s.slices),
                        exact_work_distribution(rev, hbeta, s.slices));
            }
            if (do_mc) {
                const TrajectoryCounts cf = monte_carlo_tpm(fwd, hbeta, s.shots, model,
                                                            derive_seed(common.seed, ti, hi, 0), s.slices, threads);
                const TrajectoryCounts cr = monte_carlo_tpm(rev, hbeta, s.shots, model,
                                                            derive_seed(common.seed, ti, hi, 1), s.slices, threads);
                analyze("monte_carlo", counts_to_distribution(cf, fwd), counts_to_distribution(cr, rev));
            }
            cells.push_back(cell);
        }
    }

    json doc;
    doc["schema_version"] = 1;
    doc["settings"] = s.snapshot();
    doc["master_seed"] = common.seed;
    doc["rng_algorithm"] = rng_algorithm_name;
    doc["cells"] = cells;

    emitter.write("work_distributions.csv", dist_csv.str());
    emitter.write("temperature.csv", temp_csv.str());
    emitter.write("residuals.csv", res_csv.str());
    emitter.write("run.json", doc.dump(2) + "\n");
    emitter.finish(s.snapshot());
    std::cout << "tpm: wrote " << emitter.dir().string() << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------
// gamma
// ---------------------------------------------------------------------------

int run_gamma(const CommonOptions& common) {
    const Config cfg = common.load_config();
    std::vector<double> taus = cfg.get_double_list("gamma.tau_us", {25.0, 50.0, 100.0, 200.0, 300.0});
    const long long samples = cfg.get_int("gamma.samples", 1001);
    const double z0 = cfg.get_double("protocol.z0_khz", 2.0);
    const double x_max = cfg.get_double("protocol.x_max_khz", 5.0);
    if (taus.empty()) {
        throw ConfigError("gamma.tau_us: need at least one switching time");
    }
    for (double t : taus) {
        if (!(t > 0.0)) {
            throw ConfigError("gamma.tau_us: switching times must be > 0");
        }
    }
    if (samples < 100) {
        throw ConfigError("gamma.samples: need >= 100");
    }

    RunEmitter emitter(common.out_dir, "gamma", common.seed, common.resolved_threads());
    std::ostringstream csv;
    csv << "tau_us,gamma\n";
    for (double tau : taus) {
        SwitchingProtocol p;
        p.z0_khz = z0;
        p.x_max_khz = x_max;
        p.tau_us = tau;
        csv << format_double(tau) << ',' << format_double(adiabaticity(p, static_cast<int>(samples))) << '\n';
    }
    emitter.write("gamma.csv", csv.str());
    const json snap{{"tau_us", taus}, {"samples", samples}, {"z0_khz", z0}, {"x_max_khz", x_max}};
    emitter.finish(snap);
    std::cout << "gamma: wrote " << emitter.dir().string() << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------
// pulse
// ---------------------------------------------------------------------------

struct PulseSettings {
    SixLevelModel model;
    NoiseGrid grid;
    PulseOptimizerConfig optimizer;
    bool naive_square = false;

    static PulseSettings from(const Config& cfg) {
        PulseSettings s;
        s.model.a_zz_mhz = cfg.get_double("pulse.a_zz_mhz", s.model.a_zz_mhz);
        if (s.model.a_zz_mhz == 0.0) {
            throw ConfigError("pulse.a_zz_mhz: hyperfine coupling must be nonzero");
        }
        s.grid.alpha_min = cfg.get_double("pulse.alpha_min", s.grid.alpha_min);
        s.grid.alpha_max = cfg.get_double("pulse.alpha_max", s.grid.alpha_max);
        s.grid.delta_min_mhz = cfg.get_double("pulse.delta_min_mhz", s.grid.delta_min_mhz);
        s.grid.delta_max_mhz = cfg.get_double("pulse.delta_max_mhz", s.grid.delta_max_mhz);
        s.grid.alpha_points = static_cast<int>(cfg.get_int("pulse.alpha_points", s.grid.alpha_points));
        s.grid.delta_points = static_cast<int>(cfg.get_int("pulse.delta_points", s.grid.delta_points));
        s.optimizer.segments = static_cast<int>(cfg.get_int("pulse.segments", s.optimizer.segments));
        s.optimizer.amplitude_bound_mhz =
            cfg.get_double("pulse.amplitude_bound_mhz", std::abs(s.model.a_zz_mhz) / 2.0);
        s.optimizer.starts = static_cast<int>(cfg.get_int("pulse.starts", s.optimizer.starts));
        s.optimizer.max_iterations =
            static_cast<int>(cfg.get_int("pulse.max_iterations", s.optimizer.max_iterations));
        s.optimizer.target_objective = cfg.get_double("pulse.target_objective", s.optimizer.target_objective);
        s.optimizer.total_time_us = cfg.get_double("pulse.total_time_us", 0.0);
        try {
            s.grid.validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("pulse grid: ") + e.what());
        }
        if (s.optimizer.segments < 1 || s.optimizer.starts < 1 || s.optimizer.max_iterations < 1) {
            throw ConfigError("pulse: segments, starts and max_iterations must be >= 1");
        }
        if (!(s.optimizer.amplitude_bound_mhz >= 0.0)) {
            throw ConfigError("pulse.amplitude_bound_mhz: must be >= 0");
        }
        if (s.optimizer.total_time_us < 0.0) {
            throw ConfigError("pulse.total_time_us: must be > 0 (or omitted for the model default)");
        }
        return s;
    }

    json snapshot() const {
        return json{{"a_zz_mhz", model.a_zz_mhz},
                    {"alpha_min", grid.alpha_min},
                    {"alpha_max", grid.alpha_max},
                    {"delta_min_mhz", grid.delta_min_mhz},
                    {"delta_max_mhz", grid.delta_max_mhz},
                    {"alpha_points", grid.alpha_points},
                    {"delta_points", grid.delta_points},
                    {"segments", optimizer.segments},
                    {"amplitude_bound_mhz", optimizer.amplitude_bound_mhz},
                    {"starts", optimizer.starts},
                    {"max_iterations", optimizer.max_iterations},
                    {"target_objective", optimizer.target_objective},
                    {"naive_square", naive_square}};
    }
};

std::string fidelity_surface_csv(const ControlPulse& pulse, const SixLevelModel& model, const NoiseGrid& grid) {
    std::ostringstream csv;
    csv << "alpha,delta_mhz,fidelity\n";
    for (double alpha : grid.alphas()) {
        for (double delta : grid.deltas()) {
            csv << format_double(alpha) << ',' << format_double(delta) << ','
                << format_double(gate_fidelity(pulse_propagator(pulse, model, alpha, delta), model)) << '\n';
        }
    }
    return csv.str();
}

int run_pulse(const CommonOptions& common, bool naive_square, const std::string& evaluate_path) {
    const Config cfg = common.load_config();
    PulseSettings s = PulseSettings::from(cfg);
    s.naive_square = naive_square;
    if (naive_square && !evaluate_path.empty()) {
        throw ConfigError("pulse: --naive-square and --evaluate are mutually exclusive");
    }
    RunEmitter emitter(common.out_dir, "pulse", common.seed, common.resolved_threads());

    json report;
    report["schema_version"] = 1;
    report["a_zz_mhz"] = s.model.a_zz_mhz;
    report["total_time_us"] =
        s.optimizer.total_time_us > 0.0 ? s.optimizer.total_time_us : s.model.default_total_time_us();
    report["segments"] = s.optimizer.segments;

    int code = exit_ok;
    ControlPulse emitted;
    if (!evaluate_path.empty()) {
        std::ifstream in(evaluate_path);
        if (!in) {
            throw ConfigError(evaluate_path + ": cannot open pulse file");
        }
        PulseFile loaded;
        try {
            loaded = read_pulse_file(in);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(evaluate_path + ": " + e.what());
        }
        emitted = loaded.pulse;
        if (loaded.a_zz_mhz != 0.0) {
            s.model.a_zz_mhz = loaded.a_zz_mhz;
        }
        report["kind"] = "evaluated";
        report["pulse_file"] = evaluate_path;
        report["a_zz_mhz"] = s.model.a_zz_mhz;
        report["total_time_us"] = emitted.total_time_us;
        report["segments"] = emitted.segments();
        report["nominal_fidelity"] = gate_fidelity(pulse_propagator(emitted, s.model, 0.0, 0.0), s.model);
        report["worst_grid_fidelity"] = worst_grid_fidelity(emitted, s.model, s.grid);
        report["mean_grid_fidelity"] = robust_objective(emitted, s.model, s.grid);
    } else if (naive_square) {
        emitted = naive_square_pulse(s.model, s.optimizer.segments, s.optimizer.amplitude_bound_mhz);
        report["kind"] = "naive_square";
        report["nominal_fidelity"] = gate_fidelity(pulse_propagator(emitted, s.model, 0.0, 0.0), s.model);
        report["worst_grid_fidelity"] = worst_grid_fidelity(emitted, s.model, s.grid);
        report["mean_grid_fidelity"] = robust_objective(emitted, s.model, s.grid);
    } else {
        // stage 1: nominal-point optimum, a cheap upper-bound diagnostic
        PulseOptimizerConfig nominal_cfg = s.optimizer;
        nominal_cfg.starts = std::min(s.optimizer.starts, 8);
        const PulseOptimizationResult nominal =
            optimize_pulse(s.model, NoiseGrid::nominal_only(), nominal_cfg, derive_seed(common.seed, 0));
        report["nominal_stage"] = {{"fidelity", nominal.nominal_fidelity},
                                   {"objective", nominal.objective},
                                   {"best_start", nominal.best_start}};

        // stage 2: robust optimization on the configured grid
        const PulseOptimizationResult robust =
            optimize_pulse(s.model, s.grid, s.optimizer, derive_seed(common.seed, 1));
        emitted = robust.pulse;
        report["kind"] = "optimized";
        report["nominal_fidelity"] = nominal.nominal_fidelity;
        report["robust_objective"] = robust.objective;
        report["robust_nominal_fidelity"] = robust.nominal_fidelity;
        report["worst_grid_fidelity"] = worst_grid_fidelity(robust.pulse, s.model, s.grid);
        report["reached_target"] = robust.reached_target;
        report["target_objective"] = s.optimizer.target_objective;
        report["best_start"] = robust.best_start;
        report["start_objectives"] = robust.start_objectives;
        if (!robust.reached_target) {
            report["failure"] = "robust objective below target after all restarts; best-found pulse emitted";
            code = exit_numerical_failure;
        }
    }

    std::ostringstream pulse_text;
    write_pulse_file(pulse_text, emitted, s.model);
    emitter.write("pulse.txt", pulse_text.str());
    emitter.write("robustness.csv", fidelity_surface_csv(emitted, s.model, s.grid));
    emitter.write("pulse_report.json", report.dump(2) + "\n");
    emitter.finish(s.snapshot());
    if (code != exit_ok) {
        std::cerr << "pulse: robust objective " << report["robust_objective"].get<double>()
                  << " below target " << s.optimizer.target_objective << "; artifacts written with failure flag\n";
    }
    std::cout << "pulse: wrote " << emitter.dir().string() << "\n";
    return code;
}

// ---------------------------------------------------------------------------
// readout
// ---------------------------------------------------------------------------

struct ReadoutSettings {
    ReadoutModel model;
    std::uint64_t trials = 4000;
    std::uint64_t trace_points = 4000;
    double initial_mixture = 0.5;  ///< probability the state starts in |-1>n
    double charge_acceptance = 0.41;

    static ReadoutSettings from(const Config& cfg) {
        ReadoutSettings s;
        s.model.reps = static_cast<int>(cfg.get_int("readout.reps", s.model.reps));
        s.model.lambda_bright = cfg.get_double("readout.lambda_bright", s.model.lambda_bright);
        s.model.lambda_dark = cfg.get_double("readout.lambda_dark", s.model.lambda_dark);
        s.model.flip_prob_per_rep = cfg.get_double("readout.flip_prob_per_rep", 2.7793e-5);
        s.model.pi_pulse_error = cfg.get_double("readout.pi_pulse_error", s.model.pi_pulse_error);
        const long long trials = cfg.get_int("readout.trials", static_cast<long long>(s.trials));
        const long long points = cfg.get_int("readout.trace_points", static_cast<long long>(s.trace_points));
        s.initial_mixture = cfg.get_double("readout.initial_mixture", s.initial_mixture);
        s.charge_acceptance = cfg.get_double("readout.charge_acceptance", s.charge_acceptance);
        if (trials < 1) {
            throw ConfigError("readout.trials: need >= 1");
        }
        if (points < 1) {
            throw ConfigError("readout.trace_points: need >= 1");
        }
        try {
            s.model.validate_allow_zero_contrast();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("readout model: ") + e.what());
        }
        if (!(s.initial_mixture >= 0.0) || !(s.initial_mixture <= 1.0)) {
            throw ConfigError("readout.initial_mixture: must lie in [0, 1]");
        }
        s.trials = static_cast<std::uint64_t>(trials);
        s.trace_points = static_cast<std::uint64_t>(points);
        return s;
    }

    json snapshot() const {
        return json{{"reps", model.reps},
                    {"lambda_bright", model.lambda_bright},
                    {"lambda_dark", model.lambda_dark},
                    {"flip_prob_per_rep", model.flip_prob_per_rep},
                    {"pi_pulse_error", model.pi_pulse_error},
                    {"trials", trials},
                    {"trace_points", trace_points},
                    {"initial_mixture", initial_mixture},
                    {"charge_acceptance", charge_acceptance}};
    }
};

int run_readout(const CommonOptions& common) {
    const Config cfg = common.load_config();
    const ReadoutSettings s = ReadoutSettings::from(cfg);
    RunEmitter emitter(common.out_dir, "readout", common.seed, common.resolved_threads());

    const PhotonHistogram hist =
        readout_histogram(s.model, s.trials, s.initial_mixture, derive_seed(common.seed, 0));

    std::ostringstream hist_csv;
    hist_csv << "# reps " << s.model.reps << "\n";
    hist_csv << "count,frequency\n";
    for (std::size_t k = 0; k < hist.frequency.size(); ++k) {
        hist_csv << k << ',' << hist.frequency[k] << '\n';
    }
    emitter.write("histogram.csv", hist_csv.str());

    json report;
    report["schema_version"] = 1;
    report["reps"] = s.model.reps;
    report["trials"] = s.trials;
    report["fit_method"] = hist.fit.method;
    report["expected_attempts_per_accepted_trial"] = 1.0 / s.charge_acceptance;

    int warn = 0;
    if (!hist.fit.defined) {
        report["status"] = "threshold-undefined";
        report["diagnostic"] = hist.fit.diagnostic;
        std::cerr << "readout: warning: threshold undefined (" << hist.fit.diagnostic << ")\n";
        warn = 1;
    } else {
        report["status"] = "ok";
        report["threshold"] = hist.fit.threshold;
        report["fitted_mean_dark"] = hist.fit.mean_dark;
        report["fitted_mean_bright"] = hist.fit.mean_bright;
        report["fitted_weight_dark"] = hist.fit.weight_dark;
        report["expected_misclassification"] = hist.fit.expected_misclassification;

        const TelegraphTrace trace = telegraph_trace(s.model, s.trace_points, NuclearState::in_minus_one,
                                                     hist.fit.threshold, derive_seed(common.seed, 1));
        std::ostringstream trace_csv;
        trace_csv << "# reps " << s.model.reps << "\n";
        trace_csv << "index,count,label,true_state\n";
        for (std::size_t i = 0; i < trace.points.size(); ++i) {
            trace_csv << i << ',' << trace.points[i].photon_count << ','
                      << (trace.classified(i) == NuclearState::in_minus_one ? 0 : 1) << ','
                      << (trace.points[i].true_state == NuclearState::in_minus_one ? 0 : 1) << '\n';
        }
        emitter.write("trace.csv", trace_csv.str());

        try {
            const FidelityEstimate est = estimate_fidelity(trace);
            report["nbar0"] = est.nbar0;
            report["nbar1"] = est.nbar1;
            report["plateaus0"] = est.plateaus0;
            report["plateaus1"] = est.plateaus1;
            report["fidelity"] = est.f;
            report["fidelity_minus_one"] = est.f0;
            report["fidelity_other"] = est.f1;
            report["low_confidence"] = est.low_confidence;
        } catch (const std::domain_error& e) {
            report["status"] = "fidelity-undefined";
            report["diagnostic"] = e.what();
            std::cerr << "readout: warning: " << e.what() << "\n";
            warn = 1;
        }
    }

    emitter.write("readout_report.json", report.dump(2) + "\n");
    emitter.finish(s.snapshot());
    std::cout << "readout: wrote " << emitter.dir().string() << (warn ? " (with warnings)" : "") << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------
// table1
// ---------------------------------------------------------------------------

std::vector<PopulationRow> builtin_population_rows() {
    return {{0.52, 0.48, 0.53, 0.47, 0.04},
            {0.58, 0.42, 0.69, 0.31, 0.04},
            {0.63, 0.37, 0.81, 0.19, 0.04},
            {0.68, 0.32, 0.86, 0.14, 0.04}};
}

std::vector<PopulationRow> load_population_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path + ": cannot open populations file");
    }
    std::vector<PopulationRow> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (line_no == 1 && line.find("p0") != std::string::npos) {
            continue;  // header row
        }
        std::istringstream ls(line);
        PopulationRow r;
        char comma = 0;
        if (!(ls >> r.p0 >> comma >> r.p1 >> comma >> r.q0 >> comma >> r.q1 >> comma >> r.sigma)) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'p0,p1,q0,q1,sigma'");
        }
        rows.push_back(r);
    }
    if (rows.empty()) {
        throw ConfigError(path + ": no population rows found");
    }
    return rows;
}

int run_table1(const CommonOptions& common, const std::string& populations_path) {
    const Config cfg = common.load_config();
    const double gap0 = cfg.get_double("protocol.z0_khz", 2.0);
    const double x_max = cfg.get_double("protocol.x_max_khz", 5.0);
    const double gap_tau = std::hypot(gap0, x_max);

    std::vector<PopulationRow> rows =
        populations_path.empty() ? builtin_population_rows() : load_population_rows(populations_path);
    std::vector<TemperatureEstimate> estimates;
    try {
        estimates = table1_regression(rows, gap0, gap_tau);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("table1: ") + e.what());
    }

    RunEmitter emitter(common.out_dir, "table1", common.seed, common.resolved_threads());
    std::ostringstream csv;
    csv << "p0,p1,q0,q1,sigma,h_beta_f,sigma_f,h_beta_r,sigma_r,h_beta_avg,sigma_avg,"
           "h_beta_f_2dp,h_beta_r_2dp,h_beta_avg_2dp\n";
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        const auto& t = estimates[k];
        csv << format_double(r.p0) << ',' << format_double(r.p1) << ',' << format_double(r.q0) << ','
            << format_double(r.q1) << ',' << format_double(r.sigma) << ',' << format_double(t.forward.value)
            << ',' << format_double(t.forward.std_error) << ',' << format_double(t.reversed.value) << ','
            << format_double(t.reversed.std_error) << ',' << format_double(t.average.value) << ','
            << format_double(t.average.std_error) << ',' << format_fixed2(round_half_away_2dp(t.forward.value))
            << ',' << format_fixed2(round_half_away_2dp(t.reversed.value)) << ','
            << format_fixed2(round_half_away_2dp(t.average.value)) << '\n';
    }
    emitter.write("table1.csv", csv.str());
    const json snap{{"gap0_khz", gap0}, {"gap_tau_khz", gap_tau}, {"rows", rows.size()},
                    {"populations_file", populations_path}};
    emitter.finish(snap);
    std::cout << "table1: wrote " << emitter.dir().string() << "\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crookslab: work statistics of a driven two-level system, pulse design and readout simulation"};
    app.set_version_flag("--version", std::string("crookslab ") + version_string);
    app.require_subcommand(1);

    CommonOptions tpm_opts;
    std::string tpm_mode;
    auto* tpm_cmd = app.add_subcommand("tpm", "two-point-measurement work statistics and CFT residuals");
    add_common_options(tpm_cmd, tpm_opts, "crookslab-out/tpm");
    tpm_cmd->add_option("--mode", tpm_mode, "exact | mc | both (overrides config)");

    CommonOptions gamma_opts;
    auto* gamma_cmd = app.add_subcommand("gamma", "adiabaticity parameter sweep over switching times");
    add_common_options(gamma_cmd, gamma_opts, "crookslab-out/gamma");

    CommonOptions pulse_opts;
    bool naive_square = false;
    std::string evaluate_path;
    auto* pulse_cmd = app.add_subcommand("pulse", "noise-robust control pulse design");
    add_common_options(pulse_cmd, pulse_opts, "crookslab-out/pulse");
    pulse_cmd->add_flag("--naive-square", naive_square, "evaluate the constant reference pulse instead");
    pulse_cmd->add_option("--evaluate", evaluate_path, "score an existing pulse file instead of optimizing");

    CommonOptions readout_opts;
    auto* readout_cmd = app.add_subcommand("readout", "single-shot readout statistics and fidelity");
    add_common_options(readout_cmd, readout_opts, "crookslab-out/readout");

    CommonOptions table1_opts;
    std::string populations_path;
    auto* table1_cmd = app.add_subcommand("table1", "inverse-temperature regression from populations");
    add_common_options(table1_cmd, table1_opts, "crookslab-out/table1");
    table1_cmd->add_option("--populations", populations_path, "CSV of p0,p1,q0,q1,sigma rows");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config_error;
    }

    try {
        if (tpm_cmd->parsed()) {
            return run_tpm(tpm_opts, tpm_mode);
        }
        if (gamma_cmd->parsed()) {
            return run_gamma(gamma_opts);
        }
        if (pulse_cmd->parsed()) {
            return run_pulse(pulse_opts, naive_square, evaluate_path);
        }
        if (readout_cmd->parsed()) {
            return run_readout(readout_opts);
        }
        if (table1_cmd->parsed()) {
            return run_table1(table1_opts, populations_path);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_numerical_failure;
    }
    return exit_ok;
}
