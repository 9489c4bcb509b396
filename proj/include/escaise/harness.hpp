#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "escaise/aise.hpp"
#include "escaise/esc.hpp"
#include "escaise/noise.hpp"
#include "escaise/plants.hpp"

namespace escaise::harness {

enum class PlantKind { Quadratic, Abs };

struct RunConfig {
    PlantKind plant = PlantKind::Quadratic;
    plants::AbsParams abs;
    plants::AbsState abs_initial;

    esc::EscParams esc;
    aise::AiseParams aise;  // used when esc.mode == GradientPath::Aise

    std::optional<noise::Schedule> noise;

    // Quadratic: number of steps after k = 0. Abs: derived from max_time.
    long horizon = 6000;
    double max_time = 50.0;
    long k_init = 2000;
    long k_end = 6000;  // Abs runs replace this with floor(min(t_stop, max_time) / T_s)
    double u_opt = 0.0;

    // Installed on the estimator of every run, if set. Must be thread-safe
    // when used from monte_carlo.
    aise::StepObserver aise_observer;

    [[nodiscard]] long last_step() const;
    void validate() const;
};

struct Row {
    long k;
    double t;
    double u;
    double y;
    double v;
    double y_n;
    double y_h;
    double y_l;
    double y_esc;
    double lambda = 0.0;
    double mu = 0.0;
    double nu = 0.0;
    double omega = 0.0;
};

struct Trajectory {
    PlantKind plant = PlantKind::Quadratic;
    esc::GradientPath mode = esc::GradientPath::HighPass;
    std::uint64_t seed = 0;
    std::vector<Row> rows;
    double rmse = 0.0;
    std::optional<double> t_stop;
    bool stopped = false;
};

// Runs the sampled-data loop with noise drawn from `seed`. Errors raised by the
// controller or plant are rethrown as std::runtime_error naming the step.
[[nodiscard]] Trajectory run_closed_loop(const RunConfig& config, std::uint64_t seed);

// sqrt(sum_{k=k_init..k_end} (u_k - u_opt)^2 / (k_end - k_init)).
[[nodiscard]] double rmse(const Trajectory& traj, double u_opt, long k_init, long k_end);

// First sample time with nu <= nu_eps, nullopt if never reached.
[[nodiscard]] std::optional<double> detect_t_stop(const Trajectory& traj, double nu_eps);

struct TrialResult {
    std::uint64_t seed = 0;
    bool ok = false;
    double rmse = 0.0;
    std::optional<double> t_stop;
    std::string error;
};

struct Aggregate {
    int n_trials = 0;
    int n_failed = 0;
    double mean_rmse = 0.0;
    double std_rmse = 0.0;
    std::optional<double> mean_t_stop;
    double stopped_fraction = 0.0;
    std::vector<TrialResult> trials;
};

[[nodiscard]] Aggregate aggregate(std::vector<TrialResult> trials);

// Trial i uses noise::trial_seed(base_seed, i). threads = 0 picks the
// hardware concurrency. Throws std::runtime_error when more than 10% of
// trials fail.
[[nodiscard]] Aggregate monte_carlo(const RunConfig& config, int n_trials, std::uint64_t base_seed,
                                    unsigned threads = 0);

}  // namespace escaise::harness
