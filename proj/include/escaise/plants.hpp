#pragma once

#include <array>
#include <functional>
#include <optional>

namespace escaise::plants {

[[nodiscard]] inline double quadratic_eval(double u) { return 0.25 * u * u; }

struct AbsParams {
    double m = 400.0;         // kg
    double r = 0.3;           // m
    double j_w = 1.0;         // kg m^2
    double b_f = 0.01;        // kg m^2 / s
    double g = 9.81;          // m / s^2
    double lambda_star = 0.25;
    double mu_star = 0.6;
    double c = 2.0;           // 1/s, inner-loop slip gain
    double nu_eps = 0.05;     // m/s, wheel counts as stopped at or below this speed

    void validate() const;
};

struct AbsState {
    double nu = 336.0 / 3.6;
    double omega = 1120.0 / 3.6;
    double t = 0.0;
};

// Friction coefficient; lambda is clamped to [0, 1] first.
[[nodiscard]] double mu_lambda(double lambda, const AbsParams& params);

// (nu - R Omega) / nu, or nullopt once nu <= nu_eps.
[[nodiscard]] std::optional<double> slip(double nu, double omega, double r, double nu_eps);

struct AbsDerivative {
    double nu_dot;
    double omega_dot;
    double tau_b;
    double lambda;
    double mu;
};

// Wheel dynamics closed with the feedback-linearizing braking torque.
// nullopt when the wheel has stopped.
[[nodiscard]] std::optional<AbsDerivative> abs_rhs(const AbsState& state, double lambda_d,
                                                   const AbsParams& params);

template <std::size_t N>
using Vec = std::array<double, N>;

template <std::size_t N>
using Rhs = std::function<Vec<N>(double t, const Vec<N>& x)>;

// Classical RK4. Throws std::domain_error on a non-finite derivative.
template <std::size_t N>
[[nodiscard]] Vec<N> rk4_step(const Rhs<N>& f, double t, const Vec<N>& x, double dt);

enum class StepOutcome { Running, Stopped };

struct AbsStep {
    AbsState state;
    StepOutcome outcome;
};

// Advances the wheel by dt with lambda_d held. If an RK4 stage would evaluate
// a stopped wheel, a single Euler step is taken instead and the result is
// reported as stopped.
[[nodiscard]] AbsStep abs_advance(const AbsState& state, double lambda_d, double dt,
                                  const AbsParams& params);

}  // namespace escaise::plants

#include "escaise/detail/rk4.ipp"
