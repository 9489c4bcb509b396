#include "escaise/aise.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/fisher_f.hpp>

namespace escaise::aise {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok) {
        throw std::invalid_argument("AiseParams: " + what);
    }
}

template <typename Container>
void push_capped(Container& c, typename Container::value_type v, std::size_t cap)
{
    if (cap == 0) {
        return;
    }
    c.push_front(std::move(v));
    while (c.size() > cap) {
        c.pop_back();
    }
}

}  // namespace

void AiseParams::validate() const
{
    require(n_e >= 1, "n_e must be >= 1");
    require(n_f >= 1, "n_f must be >= 1");
    require(r_z > 0.0, "r_z must be > 0");
    require(r_d > 0.0, "r_d must be > 0");
    require(r_theta > 0.0, "r_theta must be > 0");
    require(r_inf > 0.0, "r_inf must be > 0");
    require(eta_vrf > 0.0, "eta_vrf must be > 0");
    require(tau_n >= 1, "tau_n must be >= 1");
    require(tau_d > tau_n, "tau_d must be > tau_n");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    require(eta_l >= 0.0 && eta_l <= eta_u, "need 0 <= eta_l <= eta_u");
    require(eta_u > 0.0, "eta_u must be > 0");
    require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0,1]");
    require(t_s > 0.0, "t_s must be > 0");
    require(eta_grid_size >= 1, "eta_grid_size must be >= 1");
}

Forecast kf_forecast(double x_da, double dhat_prev, double t_s)
{
    const double x_fc = x_da + t_s * dhat_prev;
    return {x_fc, x_fc};
}

double input_estimate(const Eigen::VectorXd& phi, const Eigen::VectorXd& theta)
{
    if (phi.size() != theta.size()) {
        throw std::invalid_argument("input_estimate: regressor has " + std::to_string(phi.size()) +
                                    " entries, coefficient vector has " +
                                    std::to_string(theta.size()));
    }
    return phi.dot(theta);
}

Eigen::VectorXd markov_coefficients(std::span<const double> gain_history, int n_f, long k,
                                    double t_s)
{
    Eigen::VectorXd h = Eigen::VectorXd::Zero(n_f);
    double product = t_s;
    for (int i = 1; i <= n_f && i <= k; ++i) {
        if (i >= 2) {
            const auto j = static_cast<std::size_t>(i - 2);
            const double gain = j < gain_history.size() ? gain_history[j] : 0.0;
            product *= 1.0 + gain;
        }
        h(i - 1) = product;
    }
    return h;
}

Filtered filter_signals(const Eigen::VectorXd& markov,
                        const std::deque<Eigen::VectorXd>& phi_history,
                        const std::deque<double>& dhat_history, int l_theta)
{
    Filtered out{Eigen::VectorXd::Zero(l_theta), 0.0};
    for (Eigen::Index i = 0; i < markov.size(); ++i) {
        const double h = markov(i);
        if (h == 0.0) {
            continue;
        }
        const auto idx = static_cast<std::size_t>(i);
        if (idx < phi_history.size()) {
            out.phi_f += h * phi_history[idx];
        }
        if (idx < dhat_history.size()) {
            out.dhat_f += h * dhat_history[idx];
        }
    }
    return out;
}

RlsState RlsState::initial(const AiseParams& params)
{
    const int l = params.l_theta();
    RlsState s;
    s.info = params.r_theta * Eigen::MatrixXd::Identity(l, l);
    s.P = (1.0 / params.r_theta) * Eigen::MatrixXd::Identity(l, l);
    s.theta = Eigen::VectorXd::Zero(l);
    return s;
}

bool rls_update(RlsState& state, const RlsInput& in, double r_z, double r_d,
                const Eigen::MatrixXd& r_inf, const Eigen::MatrixXd& r_theta)
{
    const Eigen::Index l = state.theta.size();
    if (in.phi_f.size() != l || in.phi.size() != l) {
        throw std::invalid_argument("rls_update: regressor dimension mismatch");
    }

    Eigen::MatrixXd info = in.lambda * state.info + (1.0 - in.lambda) * r_inf +
                           r_z * in.phi_f * in.phi_f.transpose() +
                           r_d * in.phi * in.phi.transpose();
    info = 0.5 * (info + info.transpose()).eval();

    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success || !info.allFinite()) {
        std::clog << "warning: RLS information matrix lost positive definiteness; "
                     "resetting covariance to R_theta^-1\n";
        state.info = r_theta;
        state.P = r_theta.inverse();
        return false;
    }
    Eigen::MatrixXd P = llt.solve(Eigen::MatrixXd::Identity(l, l));
    P = 0.5 * (P + P.transpose()).eval();

    const double e1 = in.z_minus_dhat_f + in.phi_f.dot(state.theta);
    const double e2 = in.phi.dot(state.theta);
    state.theta -= P * (in.phi_f * (r_z * e1) + in.phi * (r_d * e2));
    state.info = std::move(info);
    state.P = std::move(P);
    return true;
}

double f_quantile(double one_minus_alpha, double d1, double d2)
{
    const boost::math::fisher_f_distribution<double> dist(d1, d2);
    return boost::math::quantile(dist, one_minus_alpha);
}

double variance_ratio(std::span<const Eigen::Vector2d> window, int tau_n, int tau_d)
{
    const auto trace_variance = [&](int tau) {
        const auto tail = window.last(static_cast<std::size_t>(tau));
        Eigen::Vector2d mean = Eigen::Vector2d::Zero();
        for (const auto& e : tail) {
            mean += e;
        }
        mean /= tau;
        double acc = 0.0;
        for (const auto& e : tail) {
            acc += (e - mean).squaredNorm();
        }
        return acc / tau;
    };
    if (window.size() < static_cast<std::size_t>(tau_d)) {
        return 0.0;
    }
    const double long_var = trace_variance(tau_d);
    if (!(long_var > 0.0)) {
        return 0.0;
    }
    return trace_variance(tau_n) / long_var;
}

double vrf_lambda(std::span<const Eigen::Vector2d> window, int tau_n, int tau_d, double threshold,
                  double eta_vrf)
{
    if (window.size() < static_cast<std::size_t>(tau_d)) {
        return 1.0;
    }
    const double f = variance_ratio(window, tau_n, tau_d);
    if (!(f > threshold)) {
        return 1.0;
    }
    const double lambda = 1.0 / (1.0 + eta_vrf * (f - threshold));
    return std::clamp(lambda, kLambdaFloor, 1.0);
}

ForgettingSchedule::ForgettingSchedule(int tau_n, int tau_d, double alpha, double eta_vrf)
    : tau_n_(tau_n), tau_d_(tau_d), eta_vrf_(eta_vrf),
      threshold_(f_quantile(1.0 - alpha, tau_n, tau_d))
{
}

double ForgettingSchedule::push(const Eigen::Vector2d& eps)
{
    window_.push_back(eps);
    if (window_.size() > static_cast<std::size_t>(tau_d_)) {
        window_.erase(window_.begin());
    }
    return vrf_lambda(window_, tau_n_, tau_d_, threshold_, eta_vrf_);
}

DataAssimilation kf_data_assim(double x_fc, double p_fc, double v1, double v2, double z)
{
    const double denom = p_fc + v2;
    const double gain = denom > 0.0 ? -p_fc / denom : 0.0;
    const double p_da = (1.0 + gain) * p_fc;
    return {x_fc + gain * z, gain, p_da, p_da + v1};
}

NoiseCovariances adapt_covariances(double sample_variance, double p_da_prev,
                                   std::span<const double> eta_grid, double beta)
{
    if (eta_grid.empty()) {
        throw std::invalid_argument("adapt_covariances: empty eta grid");
    }
    const auto j_f = [&](double eta) { return sample_variance - (p_da_prev + eta); };

    double min_pos = std::numeric_limits<double>::infinity();
    double max_pos = -std::numeric_limits<double>::infinity();
    for (double eta : eta_grid) {
        const double j = j_f(eta);
        if (j > 0.0) {
            min_pos = std::min(min_pos, j);
            max_pos = std::max(max_pos, j);
        }
    }
    const bool nonempty = min_pos <= max_pos;
    const double target = nonempty ? beta * min_pos + (1.0 - beta) * max_pos : 0.0;
    const double tol = 1e-12 * std::max(1.0, std::abs(target));

    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < eta_grid.size(); ++i) {
        const double dist = std::abs(j_f(eta_grid[i]) - target);
        if (dist < best_dist - tol) {
            best = i;
            best_dist = dist;
        }
    }
    const double eta = eta_grid[best];
    return {eta, nonempty ? j_f(eta) : 0.0};
}

std::vector<double> make_eta_grid(double eta_l, double eta_u, int count)
{
    const double lo = std::max(eta_l, 1e-12);
    if (count <= 1 || !(eta_u > lo)) {
        return {std::max(lo, eta_u)};
    }
    std::vector<double> grid(static_cast<std::size_t>(count));
    const double log_lo = std::log(lo);
    const double span = std::log(eta_u) - log_lo;
    for (int i = 0; i < count; ++i) {
        grid[static_cast<std::size_t>(i)] = std::exp(log_lo + span * i / (count - 1));
    }
    grid.front() = lo;
    grid.back() = eta_u;
    return grid;
}

double reference_process_noise(std::span<const double> state_error,
                               std::span<const double> input_error, double t_s)
{
    if (state_error.size() != input_error.size() || state_error.empty()) {
        throw std::invalid_argument("reference_process_noise: series must be non-empty and equal length");
    }
    const auto n = static_cast<double>(state_error.size());
    double mx = 0.0;
    double md = 0.0;
    for (std::size_t i = 0; i < state_error.size(); ++i) {
        mx += state_error[i];
        md += input_error[i];
    }
    mx /= n;
    md /= n;
    double var_d = 0.0;
    double cov_xd = 0.0;
    for (std::size_t i = 0; i < state_error.size(); ++i) {
        var_d += (input_error[i] - md) * (input_error[i] - md);
        cov_xd += (state_error[i] - mx) * (input_error[i] - md);
    }
    var_d /= n;
    cov_xd /= n;
    return t_s * var_d * t_s + 2.0 * cov_xd * t_s;
}

void RunningVariance::push(double z)
{
    ++n_;
    const double delta = z - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (z - mean_);
}

double RunningVariance::variance() const
{
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
}

StepObserver csv_observer(std::ostream& out, int l_theta)
{
    out << "k,y,z,dhat,lambda,eta,v2,k_da";
    for (int i = 0; i < l_theta; ++i) {
        out << ",theta_" << i;
    }
    out << '\n';
    return [&out](const StepDiagnostics& d) {
        out << std::setprecision(17) << d.k << ',' << d.y << ',' << d.z << ',' << d.dhat << ','
            << d.lambda << ',' << d.eta << ',' << d.v2 << ',' << d.k_da;
        for (Eigen::Index i = 0; i < d.theta->size(); ++i) {
            out << ',' << (*d.theta)(i);
        }
        out << '\n';
    };
}

Estimator::Estimator(AiseParams params)
    : params_((params.validate(), params)),
      r_theta_(params_.r_theta * Eigen::MatrixXd::Identity(params_.l_theta(), params_.l_theta())),
      r_inf_(params_.r_inf * Eigen::MatrixXd::Identity(params_.l_theta(), params_.l_theta())),
      eta_grid_(make_eta_grid(params_.eta_l, params_.eta_u, params_.eta_grid_size)),
      rls_(RlsState::initial(params_)),
      forgetting_(params_.tau_n, params_.tau_d, params_.alpha, params_.eta_vrf),
      eta_(eta_grid_.front())
{
}

double Estimator::step(double y)
{
    if (!std::isfinite(y)) {
        throw std::domain_error("aise: non-finite measurement at step " + std::to_string(k_));
    }
    const int n_e = params_.n_e;
    const int l = params_.l_theta();

    const double z = residual(x_fc_, y);

    Eigen::VectorXd phi = Eigen::VectorXd::Zero(l);
    for (int i = 0; i < n_e; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        if (idx < dhat_hist_.size()) {
            phi(i) = dhat_hist_[idx];
        }
        if (idx < z_hist_.size()) {
            phi(n_e + 1 + i) = z_hist_[idx];
        }
    }
    phi(n_e) = z;

    const std::vector<double> gains(gain_hist_.begin(), gain_hist_.end());
    const Eigen::VectorXd markov = markov_coefficients(gains, params_.n_f, k_, params_.t_s);
    const Filtered filtered = filter_signals(markov, phi_hist_, dhat_hist_, l);

    const Eigen::Vector2d eps(z - filtered.dhat_f + filtered.phi_f.dot(rls_.theta),
                              phi.dot(rls_.theta));
    const double lambda = forgetting_.push(eps);

    const double dhat = input_estimate(phi, rls_.theta);

    const bool ok = rls_update(rls_, {filtered.phi_f, phi, z - filtered.dhat_f, lambda},
                               params_.r_z, params_.r_d, r_inf_, r_theta_);

    residual_stats_.push(z);
    if (k_ >= 1) {
        const auto cov = adapt_covariances(residual_stats_.variance(), p_da_prev_, eta_grid_,
                                           params_.beta);
        eta_ = cov.eta;
        v2_ = cov.v2;
    }

    const double p_fc = k_ == 0 ? 0.0 : p_da_prev_ + eta_;
    const DataAssimilation da = kf_data_assim(x_fc_, p_fc, eta_, v2_, z);
    p_da_prev_ = da.p_da;
    x_fc_ = kf_forecast(da.x_da, dhat, params_.t_s).x_fc;

    const auto hist_len = static_cast<std::size_t>(std::max(n_e, params_.n_f));
    push_capped(dhat_hist_, dhat, hist_len);
    push_capped(z_hist_, z, static_cast<std::size_t>(n_e));
    push_capped(gain_hist_, da.k_da, static_cast<std::size_t>(params_.n_f - 1));
    push_capped(phi_hist_, phi, static_cast<std::size_t>(params_.n_f));

    if (observer_) {
        observer_({k_, y, z, dhat, lambda, eta_, v2_, da.k_da, p_fc, da.p_da, !ok, &rls_.theta,
                   &rls_.P});
    }
    ++k_;
    return dhat;
}

}  // namespace escaise::aise
