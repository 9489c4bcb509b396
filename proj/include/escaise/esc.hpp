#pragma once

#include <functional>
#include <optional>

#include "escaise/aise.hpp"

namespace escaise::esc {

enum class GradientPath { HighPass, Aise };

// Discrete-time extremum-seeking controller settings. Frequencies multiply
// T_s * k directly, i.e. omega * T_s is the phase advance per step.
struct EscParams {
    double k_g = 1.0;
    double k_esc = -1.0;  // < 0 minimizes, > 0 maximizes
    std::function<int(long)> k_en = [](long) { return 1; };
    double omega_l = 0.1;
    double omega_h = 0.1;  // high-pass path only
    double a_esc = 0.1;
    double omega_esc = 1.0;
    double u0 = 0.0;
    double t_s = 1.0;
    GradientPath mode = GradientPath::HighPass;

    void validate() const;
};

// y_h,k = -omega_h T_s y_h,k-1 + y_g,k - y_g,k-1
[[nodiscard]] double highpass_step(double y_h_prev, double y_g, double y_g_prev, double omega_h,
                                   double t_s);

// y_l,k = (1 - omega_l T_s) y_l,k-1 + omega_l T_s K_en,k y_h,k-1 A sin(omega T_s (k-1))
[[nodiscard]] double lowpass_demod_step(double y_l_prev, double y_h_prev, long k,
                                        const EscParams& params);

[[nodiscard]] inline double integrator_step(double y_esc_prev, double y_l_prev)
{
    return y_esc_prev + y_l_prev;
}

// u_k = K_esc y_esc,k + A sin(omega T_s k) + u0
[[nodiscard]] double esc_output(double y_esc, long k, const EscParams& params);

struct EscState {
    double y_h = 0.0;
    double y_l = 0.0;
    double y_esc = 0.0;
    double y_g_prev = 0.0;
    long k = 0;
};

class Controller {
public:
    // aise_params is required iff params.mode == GradientPath::Aise.
    explicit Controller(EscParams params, std::optional<aise::AiseParams> aise_params = std::nullopt);

    // Consumes y_n,k and returns u_k. Throws std::domain_error on non-finite input.
    double step(double y_n);

    // u_k as the next call to step() will return it. u_k depends only on
    // states through k-1, so a static plant can be evaluated at u_k first.
    [[nodiscard]] double pending_output() const;

    [[nodiscard]] const EscState& state() const { return state_; }
    [[nodiscard]] const EscParams& params() const { return params_; }
    [[nodiscard]] aise::Estimator* estimator() { return aise_ ? &*aise_ : nullptr; }

private:
    EscParams params_;
    EscState state_;
    std::optional<aise::Estimator> aise_;
};

}  // namespace escaise::esc
