#include "escaise/esc.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace escaise::esc {

void EscParams::validate() const
{
    const auto fail = [](const char* what) { throw std::invalid_argument(std::string("EscParams: ") + what); };
    if (!(t_s > 0.0)) fail("t_s must be > 0");
    if (!(k_g > 0.0)) fail("k_g must be > 0");
    if (!(a_esc > 0.0)) fail("a_esc must be > 0");
    if (!(omega_esc > 0.0)) fail("omega_esc must be > 0");
    if (!(omega_l > 0.0 && omega_l * t_s < 1.0)) fail("omega_l * t_s must lie in (0,1)");
    if (mode == GradientPath::HighPass && !(omega_h > 0.0 && omega_h * t_s < 1.0)) {
        fail("omega_h * t_s must lie in (0,1)");
    }
    if (!k_en) fail("k_en must be set");
}

double highpass_step(double y_h_prev, double y_g, double y_g_prev, double omega_h, double t_s)
{
    return -omega_h * t_s * y_h_prev + y_g - y_g_prev;
}

double lowpass_demod_step(double y_l_prev, double y_h_prev, long k, const EscParams& params)
{
    const double a = params.omega_l * params.t_s;
    const double dither = params.a_esc * std::sin(params.omega_esc * params.t_s * static_cast<double>(k - 1));
    return (1.0 - a) * y_l_prev + a * params.k_en(k) * y_h_prev * dither;
}

double esc_output(double y_esc, long k, const EscParams& params)
{
    return params.k_esc * y_esc +
           params.a_esc * std::sin(params.omega_esc * params.t_s * static_cast<double>(k)) + params.u0;
}

Controller::Controller(EscParams params, std::optional<aise::AiseParams> aise_params)
    : params_(std::move(params))
{
    params_.validate();
    if (params_.mode == GradientPath::Aise) {
        if (!aise_params) {
            throw std::invalid_argument("Controller: AISE path selected without AISE parameters");
        }
        aise_.emplace(*aise_params);
    }
}

double Controller::pending_output() const
{
    if (state_.k == 0) {
        return esc_output(0.0, 0, params_);
    }
    return esc_output(integrator_step(state_.y_esc, state_.y_l), state_.k, params_);
}

double Controller::step(double y_n)
{
    if (!std::isfinite(y_n)) {
        throw std::domain_error("esc: non-finite measurement at step " + std::to_string(state_.k));
    }
    const long k = state_.k;
    const double y_g = params_.k_g * y_n;

    double u = 0.0;
    if (k == 0) {
        // Internal states start at zero; the estimator still consumes y_g,0.
        state_.y_h = aise_ ? aise_->step(y_g) : 0.0;
        u = esc_output(0.0, 0, params_);
    } else {
        const double y_h = aise_ ? aise_->step(y_g)
                                 : highpass_step(state_.y_h, y_g, state_.y_g_prev, params_.omega_h,
                                                 params_.t_s);
        const double y_l = lowpass_demod_step(state_.y_l, state_.y_h, k, params_);
        const double y_esc = integrator_step(state_.y_esc, state_.y_l);
        state_.y_h = y_h;
        state_.y_l = y_l;
        state_.y_esc = y_esc;
        u = esc_output(y_esc, k, params_);
    }
    state_.y_g_prev = y_g;
    state_.k = k + 1;
    return u;
}

}  // namespace escaise::esc
