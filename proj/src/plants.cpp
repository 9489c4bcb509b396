#include "escaise/plants.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace escaise::plants {

void AbsParams::validate() const
{
    const auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("AbsParams: ") + what);
    };
    require(m > 0.0, "m must be > 0");
    require(r > 0.0, "r must be > 0");
    require(j_w > 0.0, "j_w must be > 0");
    require(b_f > 0.0, "b_f must be > 0");
    require(g > 0.0, "g must be > 0");
    require(lambda_star > 0.0 && lambda_star < 1.0, "lambda_star must lie in (0,1)");
    require(mu_star > 0.0, "mu_star must be > 0");
    require(c > 0.0, "c must be > 0");
    require(nu_eps > 0.0, "nu_eps must be > 0");
}

double mu_lambda(double lambda, const AbsParams& params)
{
    const double l = std::clamp(lambda, 0.0, 1.0);
    const double ls = params.lambda_star;
    return 2.0 * params.mu_star * ls * l / (ls * ls + l * l);
}

std::optional<double> slip(double nu, double omega, double r, double nu_eps)
{
    if (!(nu > nu_eps)) {
        return std::nullopt;
    }
    return (nu - r * omega) / nu;
}

std::optional<AbsDerivative> abs_rhs(const AbsState& state, double lambda_d, const AbsParams& p)
{
    const auto lambda = slip(state.nu, state.omega, p.r, p.nu_eps);
    if (!lambda) {
        return std::nullopt;
    }
    const double mu = mu_lambda(*lambda, p);
    const double nu_dot = -p.g * mu;
    const double tau_b = -(p.c * p.j_w * state.nu / p.r) * (*lambda - lambda_d) - p.b_f * state.omega -
                         (p.j_w * state.omega / state.nu) * nu_dot - p.m * p.r * nu_dot;
    const double omega_dot = -(p.b_f / p.j_w) * state.omega + (p.m * p.g * p.r / p.j_w) * mu - tau_b;
    return AbsDerivative{nu_dot, omega_dot, tau_b, *lambda, mu};
}

namespace {

struct WheelStopped {};

}  // namespace

AbsStep abs_advance(const AbsState& state, double lambda_d, double dt, const AbsParams& params)
{
    const Rhs<2> f = [&](double t, const Vec<2>& x) -> Vec<2> {
        const auto d = abs_rhs(AbsState{x[0], x[1], t}, lambda_d, params);
        if (!d) {
            throw WheelStopped{};
        }
        return {d->nu_dot, d->omega_dot};
    };

    try {
        const Vec<2> next = rk4_step<2>(f, state.t, {state.nu, state.omega}, dt);
        AbsState out{next[0], next[1], state.t + dt};
        const auto outcome = out.nu > params.nu_eps ? StepOutcome::Running : StepOutcome::Stopped;
        return {out, outcome};
    } catch (const WheelStopped&) {
    }

    const auto d = abs_rhs(state, lambda_d, params);
    if (!d) {
        return {state, StepOutcome::Stopped};
    }
    AbsState out{state.nu + dt * d->nu_dot, state.omega + dt * d->omega_dot, state.t + dt};
    if (!std::isfinite(out.nu) || !std::isfinite(out.omega)) {
        throw std::domain_error("abs_advance: non-finite state at t=" + std::to_string(state.t));
    }
    return {out, StepOutcome::Stopped};
}

}  // namespace escaise::plants
