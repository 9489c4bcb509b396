#include "escaise/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace escaise::harness {

namespace {

long steps_in(double time, double t_s)
{
    return static_cast<long>(std::floor(time / t_s + 1e-9));
}

}  // namespace

long RunConfig::last_step() const
{
    return plant == PlantKind::Abs ? steps_in(max_time, esc.t_s) : horizon;
}

void RunConfig::validate() const
{
    esc.validate();
    if (esc.mode == esc::GradientPath::Aise) {
        aise.validate();
        if (aise.t_s != esc.t_s) {
            throw std::invalid_argument("RunConfig: AISE and ESC sample times differ");
        }
    }
    if (plant == PlantKind::Abs) {
        abs.validate();
        if (!(max_time > 0.0)) {
            throw std::invalid_argument("RunConfig: max_time must be > 0");
        }
    } else if (horizon <= 0) {
        throw std::invalid_argument("RunConfig: horizon must be > 0");
    }
    if (!(k_init >= 0 && k_init < k_end && k_end <= last_step())) {
        throw std::invalid_argument("RunConfig: need 0 <= k_init < k_end <= horizon");
    }
}

Trajectory run_closed_loop(const RunConfig& config, std::uint64_t seed)
{
    config.validate();

    const double t_s = config.esc.t_s;
    const long last = config.last_step();
    const bool is_abs = config.plant == PlantKind::Abs;

    esc::Controller controller(config.esc, config.esc.mode == esc::GradientPath::Aise
                                               ? std::optional<aise::AiseParams>(config.aise)
                                               : std::nullopt);
    if (auto* est = controller.estimator(); est && config.aise_observer) {
        est->set_observer(config.aise_observer);
    }
    noise::Sampler sampler(config.noise.value_or(noise::Schedule({{0, 0.0}})), seed);

    Trajectory traj;
    traj.plant = config.plant;
    traj.mode = config.esc.mode;
    traj.seed = seed;
    traj.rows.reserve(static_cast<std::size_t>(last + 1));

    plants::AbsState wheel = config.abs_initial;
    bool wheel_stopped = false;

    for (long k = 0; k <= last; ++k) {
        Row row{};
        row.k = k;
        row.t = static_cast<double>(k) * t_s;
        try {
            if (is_abs) {
                row.nu = wheel.nu;
                row.omega = wheel.omega;
                const auto lambda = plants::slip(wheel.nu, wheel.omega, config.abs.r, config.abs.nu_eps);
                if (lambda) {
                    row.lambda = *lambda;
                } else {
                    row.lambda = wheel.nu > 0.0 ? (wheel.nu - config.abs.r * wheel.omega) / wheel.nu : 1.0;
                    wheel_stopped = true;
                }
                row.mu = plants::mu_lambda(row.lambda, config.abs);
                row.y = row.mu;
            } else {
                row.u = controller.pending_output();
                row.y = plants::quadratic_eval(row.u);
            }
            row.v = sampler.next();
            row.y_n = row.y + row.v;

            if (wheel_stopped) {
                row.u = controller.pending_output();
            } else {
                row.u = controller.step(row.y_n);
            }
            const auto& st = controller.state();
            row.y_h = st.y_h;
            row.y_l = st.y_l;
            row.y_esc = st.y_esc;
            traj.rows.push_back(row);

            if (wheel_stopped || k == last) {
                break;
            }
            if (is_abs) {
                const auto next = plants::abs_advance(wheel, row.u, t_s, config.abs);
                wheel = next.state;
                wheel_stopped = next.outcome == plants::StepOutcome::Stopped;
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("step " + std::to_string(k) + ": " + e.what());
        }
    }

    long k_end = config.k_end;
    if (is_abs) {
        traj.stopped = wheel_stopped;
        traj.t_stop = detect_t_stop(traj, config.abs.nu_eps);
        k_end = traj.t_stop ? traj.rows.back().k : last;
    }
    traj.rmse = rmse(traj, config.u_opt, config.k_init, k_end);
    return traj;
}

double rmse(const Trajectory& traj, double u_opt, long k_init, long k_end)
{
    if (!(k_init >= 0 && k_init < k_end && static_cast<std::size_t>(k_end) < traj.rows.size())) {
        throw std::out_of_range("rmse: window [" + std::to_string(k_init) + ", " + std::to_string(k_end) +
                                "] outside trajectory of " + std::to_string(traj.rows.size()) + " rows");
    }
    double sum = 0.0;
    for (long k = k_init; k <= k_end; ++k) {
        const double e = traj.rows[static_cast<std::size_t>(k)].u - u_opt;
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(k_end - k_init));
}

std::optional<double> detect_t_stop(const Trajectory& traj, double nu_eps)
{
    if (traj.plant != PlantKind::Abs) {
        throw std::logic_error("detect_t_stop: trajectory has no wheel state");
    }
    for (const auto& row : traj.rows) {
        if (row.nu <= nu_eps) {
            return row.t;
        }
    }
    if (traj.stopped && !traj.rows.empty()) {
        return traj.rows.back().t;
    }
    return std::nullopt;
}

Aggregate aggregate(std::vector<TrialResult> trials)
{
    Aggregate agg;
    agg.n_trials = static_cast<int>(trials.size());
    double sum = 0.0;
    double sum_t = 0.0;
    int ok = 0;
    int stopped = 0;
    for (const auto& t : trials) {
        if (!t.ok) {
            ++agg.n_failed;
            continue;
        }
        ++ok;
        sum += t.rmse;
        if (t.t_stop) {
            ++stopped;
            sum_t += *t.t_stop;
        }
    }
    if (ok > 0) {
        agg.mean_rmse = sum / ok;
        double ss = 0.0;
        for (const auto& t : trials) {
            if (t.ok) {
                ss += (t.rmse - agg.mean_rmse) * (t.rmse - agg.mean_rmse);
            }
        }
        agg.std_rmse = ok > 1 ? std::sqrt(ss / (ok - 1)) : 0.0;
        agg.stopped_fraction = static_cast<double>(stopped) / ok;
    }
    if (stopped > 0) {
        agg.mean_t_stop = sum_t / stopped;
    }
    agg.trials = std::move(trials);
    return agg;
}

Aggregate monte_carlo(const RunConfig& config, int n_trials, std::uint64_t base_seed, unsigned threads)
{
    if (n_trials < 1) {
        throw std::invalid_argument("monte_carlo: n_trials must be >= 1");
    }
    config.validate();
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = std::min<unsigned>(threads, static_cast<unsigned>(n_trials));

    std::vector<TrialResult> results(static_cast<std::size_t>(n_trials));
    std::atomic<int> next{0};
    const auto worker = [&] {
        for (int i = next++; i < n_trials; i = next++) {
            TrialResult& r = results[static_cast<std::size_t>(i)];
            r.seed = noise::trial_seed(base_seed, static_cast<std::uint64_t>(i));
            try {
                const Trajectory traj = run_closed_loop(config, r.seed);
                r.rmse = traj.rmse;
                r.t_stop = traj.t_stop;
                r.ok = true;
            } catch (const std::exception& e) {
                r.error = e.what();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
    }

    Aggregate agg = aggregate(std::move(results));
    if (agg.n_failed * 10 > agg.n_trials) {
        std::string first;
        for (const auto& t : agg.trials) {
            if (!t.ok) {
                first = t.error;
                break;
            }
        }
        throw std::runtime_error("monte_carlo: " + std::to_string(agg.n_failed) + " of " +
                                 std::to_string(agg.n_trials) + " trials failed (first: " + first + ")");
    }
    return agg;
}

}  // namespace escaise::harness
