#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace escaise::aise {

// Tuning of the adaptive input and state estimator. The state model is the
// scalar discrete integrator x_{k+1} = x_k + T_s d_k, y_k = x_k + noise.
struct AiseParams {
    int n_e = 1;            // order of the input-estimation subsystem
    int n_f = 2;            // number of Markov taps in the retrospective filter
    double r_z = 1.0;       // weight on the retrospective residual
    double r_d = 1e-8;      // weight on the input-estimate magnitude
    double r_theta = 1e-7;  // regularization, R_theta = r_theta * I
    double r_inf = 1e4;     // resetting matrix, R_inf = r_inf * I
    double eta_vrf = 0.02;  // variable-rate forgetting gain
    int tau_n = 5;          // short residual window
    int tau_d = 25;         // long residual window
    double alpha = 0.02;    // F-test significance
    double eta_l = 1e-6;    // process-noise search interval [eta_l, eta_u]
    double eta_u = 1.0;
    double beta = 0.5;      // interpolation weight between min and max of S_f
    double t_s = 1.0;       // sample time (s)
    int eta_grid_size = 50;

    [[nodiscard]] int l_theta() const { return 2 * n_e + 1; }

    // Throws std::invalid_argument naming the first violated constraint.
    void validate() const;
};

inline constexpr double kLambdaFloor = 0.01;

// Kalman forecast with A = 1, B = T_s, C = 1.
struct Forecast {
    double x_fc;
    double y_fc;
};
[[nodiscard]] Forecast kf_forecast(double x_da, double dhat_prev, double t_s);

[[nodiscard]] inline double residual(double y_fc, double y_meas) { return y_fc - y_meas; }

// Inner product of the regressor row with the coefficient vector.
[[nodiscard]] double input_estimate(const Eigen::VectorXd& phi, const Eigen::VectorXd& theta);

// Markov coefficients H_{1..n_f} at step k. gain_history[j] holds K_da,{k-1-j}.
[[nodiscard]] Eigen::VectorXd markov_coefficients(std::span<const double> gain_history, int n_f,
                                                  long k, double t_s);

// phi_history[j] / dhat_history[j] hold Phi_{k-1-j} / dhat_{k-1-j}.
struct Filtered {
    Eigen::VectorXd phi_f;
    double dhat_f;
};
[[nodiscard]] Filtered filter_signals(const Eigen::VectorXd& markov,
                                      const std::deque<Eigen::VectorXd>& phi_history,
                                      const std::deque<double>& dhat_history, int l_theta);

// Recursive least squares in information form. info is P^{-1}; P is kept
// alongside so callers can inspect the covariance without re-inverting.
struct RlsState {
    Eigen::MatrixXd info;
    Eigen::MatrixXd P;
    Eigen::VectorXd theta;

    static RlsState initial(const AiseParams& params);
};

struct RlsInput {
    Eigen::VectorXd phi_f;  // first row of the stacked regressor
    Eigen::VectorXd phi;    // second row
    double z_minus_dhat_f;  // first entry of the stacked target; the second is 0
    double lambda;
};

// One RLS step:
//   P'^{-1} = lambda P^{-1} + (1 - lambda) R_inf + Phi~^T R~ Phi~
//   theta'  = theta - P' Phi~^T R~ (z~ + Phi~ theta)
// Returns false when P'^{-1} lost positive definiteness and the state was
// reset to P = R_theta^{-1} (theta is kept).
bool rls_update(RlsState& state, const RlsInput& in, double r_z, double r_d,
                const Eigen::MatrixXd& r_inf, const Eigen::MatrixXd& r_theta);

// Variable-rate forgetting from the F-test on residual-error windows.
class ForgettingSchedule {
public:
    ForgettingSchedule(int tau_n, int tau_d, double alpha, double eta_vrf);

    // Appends eps_k and returns lambda_k.
    double push(const Eigen::Vector2d& eps);

    [[nodiscard]] double threshold() const { return threshold_; }
    [[nodiscard]] const std::vector<Eigen::Vector2d>& window() const { return window_; }

private:
    int tau_n_;
    int tau_d_;
    double eta_vrf_;
    double threshold_;
    std::vector<Eigen::Vector2d> window_;  // oldest first, at most tau_d entries
};

// Trace ratio tr(Sigma_{tau_n}) / tr(Sigma_{tau_d}) over the newest entries of
// the window, with 1/tau normalization. Returns 0 when the long window has
// zero spread.
[[nodiscard]] double variance_ratio(std::span<const Eigen::Vector2d> window, int tau_n, int tau_d);

// lambda from the statistic; 1 when the F-test does not reject.
[[nodiscard]] double vrf_lambda(std::span<const Eigen::Vector2d> window, int tau_n, int tau_d,
                                double threshold, double eta_vrf);

// Upper (1 - alpha) quantile of the F distribution with (d1, d2) degrees of freedom.
[[nodiscard]] double f_quantile(double one_minus_alpha, double d1, double d2);

struct DataAssimilation {
    double x_da;
    double k_da;
    double p_da;
    double p_fc_next;
};
[[nodiscard]] DataAssimilation kf_data_assim(double x_fc, double p_fc, double v1, double v2,
                                             double z);

struct NoiseCovariances {
    double eta;
    double v2;
};

// Chooses (eta, V2) over the candidate grid given the residual sample
// variance and P_da,{k-1}. Grid must be ascending; ties go to the smaller eta.
[[nodiscard]] NoiseCovariances adapt_covariances(double sample_variance, double p_da_prev,
                                                 std::span<const double> eta_grid, double beta);

// Log-spaced candidates over [max(eta_l, 1e-12), eta_u].
[[nodiscard]] std::vector<double> make_eta_grid(double eta_l, double eta_u, int count);

// Non-adaptive process-noise reference: V1 = B var(e_d) B + 2 A cov(e_x, e_d) B
// from sample series of state and input errors. Not used by the estimator.
[[nodiscard]] double reference_process_noise(std::span<const double> state_error,
                                             std::span<const double> input_error, double t_s);

// Welford accumulator for the residual mean and the 1/k sample variance.
class RunningVariance {
public:
    void push(double z);
    [[nodiscard]] long count() const { return n_; }
    [[nodiscard]] double mean() const { return mean_; }
    // (1/k) sum_{i=0..k} (z_i - zbar)^2 with k = count - 1; 0 for a single sample.
    [[nodiscard]] double variance() const;

private:
    long n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

// Per-step internals, handed to an optional observer.
struct StepDiagnostics {
    long k;
    double y;
    double z;
    double dhat;
    double lambda;
    double eta;
    double v2;
    double k_da;
    double p_fc;
    double p_da;
    bool covariance_reset;
    const Eigen::VectorXd* theta;
    const Eigen::MatrixXd* P;
};

using StepObserver = std::function<void(const StepDiagnostics&)>;

// Observer that writes "k,y,z,dhat,lambda,eta,v2,k_da,theta_0,...". The header
// row is written immediately; the stream must outlive the observer.
[[nodiscard]] StepObserver csv_observer(std::ostream& out, int l_theta);

class Estimator {
public:
    explicit Estimator(AiseParams params);

    // Consumes y_k and returns dhat_k. Throws std::domain_error on non-finite y.
    double step(double y);

    void set_observer(StepObserver observer) { observer_ = std::move(observer); }

    [[nodiscard]] const AiseParams& params() const { return params_; }
    [[nodiscard]] long steps() const { return k_; }
    [[nodiscard]] const Eigen::VectorXd& theta() const { return rls_.theta; }
    [[nodiscard]] const Eigen::MatrixXd& covariance() const { return rls_.P; }
    [[nodiscard]] double eta() const { return eta_; }
    [[nodiscard]] double v2() const { return v2_; }
    [[nodiscard]] double forgetting_threshold() const { return forgetting_.threshold(); }
    [[nodiscard]] const std::vector<double>& eta_grid() const { return eta_grid_; }

private:
    AiseParams params_;
    Eigen::MatrixXd r_theta_;
    Eigen::MatrixXd r_inf_;
    std::vector<double> eta_grid_;
    RlsState rls_;
    ForgettingSchedule forgetting_;
    RunningVariance residual_stats_;

    double x_fc_ = 0.0;
    double p_da_prev_ = 0.0;
    double eta_;
    double v2_ = 0.0;

    // Newest first.
    std::deque<double> dhat_hist_;
    std::deque<double> z_hist_;
    std::deque<double> gain_hist_;
    std::deque<Eigen::VectorXd> phi_hist_;

    long k_ = 0;
    StepObserver observer_;
};

}  // namespace escaise::aise
