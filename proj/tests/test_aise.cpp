#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "escaise/aise.hpp"

using namespace escaise::aise;

namespace {

// F CDF by composite Simpson quadrature of the density.
double f_cdf_simpson(double x, double d1, double d2)
{
    const double log_b = std::lgamma(d1 / 2) + std::lgamma(d2 / 2) - std::lgamma((d1 + d2) / 2);
    const auto pdf = [&](double t) {
        if (t <= 0.0) return d1 == 2.0 ? std::exp(std::log(d1 / d2) - log_b) : 0.0;
        return std::exp((d1 / 2) * std::log(d1 / d2) + (d1 / 2 - 1) * std::log(t) -
                        ((d1 + d2) / 2) * std::log1p(d1 * t / d2) - log_b);
    };
    const int n = 200000;
    const double h = x / n;
    double s = pdf(0.0) + pdf(x);
    for (int i = 1; i < n; ++i) {
        s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
    }
    return s * h / 3.0;
}

AiseParams example1_params()
{
    return AiseParams{};
}

AiseParams example2_params()
{
    AiseParams p;
    p.n_e = 10;
    p.n_f = 20;
    p.r_z = 1.0;
    p.r_d = 10.0;
    p.r_theta = 1e-2;
    p.r_inf = 1e4;
    p.eta_vrf = 0.001;
    p.tau_n = 2;
    p.tau_d = 10;
    p.alpha = 0.02;
    p.eta_l = 1e-8;
    p.eta_u = 1e4;
    p.beta = 0.55;
    p.t_s = 0.01;
    return p;
}

}  // namespace

TEST_CASE("forecast and residual")
{
    CHECK(kf_forecast(0.0, 0.0, 1.0).x_fc == 0.0);
    CHECK(kf_forecast(0.0, 0.0, 1.0).y_fc == 0.0);
    CHECK(kf_forecast(2.0, 3.0, 1.0).x_fc == 5.0);
    CHECK(kf_forecast(1.0, 10.0, 0.01).x_fc == doctest::Approx(1.1).epsilon(1e-15));

    CHECK(residual(0.3, 0.3) == 0.0);
    CHECK(residual(1.0, 0.25) == 0.75);
    CHECK(residual(0.0, 5.0) == -5.0);
}

TEST_CASE("input estimate")
{
    CHECK(input_estimate(Eigen::Vector3d(2, 3, 7), Eigen::Vector3d::Zero()) == 0.0);
    CHECK(input_estimate(Eigen::Vector3d(2, 3, 7), Eigen::Vector3d(0.5, 1, 0)) == 4.0);
    CHECK_THROWS_AS((void)input_estimate(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(21)),
                    std::invalid_argument);

    AiseParams p = example2_params();
    CHECK(p.l_theta() == 21);
    Estimator est(p);
    CHECK(est.theta().size() == 21);
}

TEST_CASE("markov coefficients")
{
    const std::vector<double> none;
    CHECK(markov_coefficients(none, 1, 1, 1.0)(0) == 1.0);

    const std::vector<double> gains{-0.5, -0.2, -0.1};
    const auto h = markov_coefficients(gains, 4, 2, 0.01);
    CHECK(h(0) == 0.01);
    CHECK(h(1) == doctest::Approx(0.005).epsilon(1e-15));
    CHECK(h(2) == 0.0);
    CHECK(h(3) == 0.0);

    const auto h4 = markov_coefficients(gains, 4, 10, 1.0);
    CHECK(h4(3) == doctest::Approx(0.5 * 0.8 * 0.9).epsilon(1e-15));
    CHECK(markov_coefficients(gains, 3, 0, 1.0).isZero());
}

TEST_CASE("filtered signals")
{
    const std::deque<Eigen::VectorXd> phi0{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)};
    const auto z = filter_signals(Eigen::Vector2d(1, 1), phi0, {0.0, 0.0}, 3);
    CHECK(z.phi_f.isZero());
    CHECK(z.dhat_f == 0.0);

    const auto one = filter_signals(Eigen::VectorXd::Constant(1, 1.0), {}, {2.0}, 3);
    CHECK(one.dhat_f == 2.0);

    const std::deque<Eigen::VectorXd> phi{Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 2, 0)};
    const auto two = filter_signals(Eigen::Vector2d(0.01, 0.005), phi, {1.0, -1.0}, 3);
    CHECK(two.dhat_f == doctest::Approx(0.005).epsilon(1e-14));
    CHECK(two.phi_f(0) == doctest::Approx(0.01));
    CHECK(two.phi_f(1) == doctest::Approx(0.01));
}

TEST_CASE("rls update hand cases")
{
    const Eigen::MatrixXd r_inf = 1e4 * Eigen::MatrixXd::Identity(3, 3);
    const Eigen::MatrixXd r_theta = Eigen::MatrixXd::Identity(3, 3);

    SUBCASE("no excitation and no forgetting leaves the state unchanged")
    {
        RlsState s{Eigen::MatrixXd::Identity(3, 3) * 2.0, Eigen::MatrixXd::Identity(3, 3) * 0.5,
                   Eigen::Vector3d(1, -2, 3)};
        const RlsState before = s;
        CHECK(rls_update(s, {Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), 4.0, 1.0}, 1.0, 1.0, r_inf,
                         r_theta));
        CHECK(s.theta == before.theta);
        CHECK(s.info.isApprox(before.info));
    }

    SUBCASE("unit forgetting drops the resetting term")
    {
        RlsState s{Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)};
        const Eigen::Vector3d pf(1, 2, 0), ph(0, 1, 1);
        rls_update(s, {pf, ph, 0.3, 1.0}, 2.0, 3.0, r_inf, r_theta);
        const Eigen::MatrixXd expect =
            Eigen::MatrixXd::Identity(3, 3) + 2.0 * pf * pf.transpose() + 3.0 * ph * ph.transpose();
        CHECK(s.info.isApprox(expect, 1e-14));
        CHECK((s.P * s.info).isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-12));
    }

    SUBCASE("scalar")
    {
        const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
        RlsState s{one, one, Eigen::VectorXd::Zero(1)};
        rls_update(s, {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Zero(1), 1.0, 1.0}, 1.0, 1.0,
                   one * 1e4, one);
        CHECK(s.P(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(s.theta(0) == doctest::Approx(-0.5).epsilon(1e-15));
    }

    SUBCASE("indefinite information matrix resets the covariance")
    {
        RlsState s{-Eigen::MatrixXd::Identity(3, 3), -Eigen::MatrixXd::Identity(3, 3), Eigen::Vector3d(1, 2, 3)};
        CHECK_FALSE(rls_update(s, {Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), 0.0, 1.0}, 1.0, 1.0,
                               r_inf, 4.0 * r_theta));
        CHECK(s.P.isApprox(0.25 * Eigen::MatrixXd::Identity(3, 3)));
        CHECK(s.theta == Eigen::Vector3d(1, 2, 3));
    }
}

TEST_CASE("rls matches the dense minimizer of the retrospective cost")
{
    std::mt19937_64 rng(20240611);
    std::normal_distribution<double> n01;
    std::uniform_int_distribution<int> len_dist(1, 30);
    std::uniform_int_distribution<int> ne_dist(1, 3);

    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n_e = ne_dist(rng);
        const int l = 2 * n_e + 1;
        const int len = len_dist(rng);
        const double r_z = std::exp(n01(rng));
        const double r_d = std::exp(n01(rng) - 2.0);
        const Eigen::MatrixXd r_theta = 0.1 * Eigen::MatrixXd::Identity(l, l);

        RlsState s{r_theta, r_theta.inverse(), Eigen::VectorXd::Zero(l)};
        Eigen::MatrixXd normal = r_theta;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(l);
        for (int k = 0; k < len; ++k) {
            Eigen::VectorXd pf(l), ph(l);
            for (int i = 0; i < l; ++i) {
                pf(i) = n01(rng);
                ph(i) = n01(rng);
            }
            const double zd = n01(rng);
            rls_update(s, {pf, ph, zd, 1.0}, r_z, r_d, 1e4 * Eigen::MatrixXd::Identity(l, l), r_theta);

            // J(theta) = theta' R_theta theta + sum r_z (zd + pf' theta)^2 + r_d (ph' theta)^2
            normal += r_z * pf * pf.transpose() + r_d * ph * ph.transpose();
            rhs -= r_z * zd * pf;
        }
        const Eigen::VectorXd dense = normal.ldlt().solve(rhs);
        const double rel = (s.theta - dense).norm() / std::max(dense.norm(), 1e-300);
        worst = std::max(worst, rel);
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("variable-rate forgetting")
{
    const double thr = f_quantile(0.98, 5, 25);
    CHECK(f_cdf_simpson(thr, 5, 25) == doctest::Approx(0.98).epsilon(1e-6));
    CHECK(f_cdf_simpson(f_quantile(0.98, 2, 10), 2, 10) == doctest::Approx(0.98).epsilon(1e-6));

    std::vector<Eigen::Vector2d> constant(25, Eigen::Vector2d(1.5, -0.5));
    CHECK(vrf_lambda(constant, 5, 25, thr, 0.02) == 1.0);

    std::vector<Eigen::Vector2d> short_window(24, Eigen::Vector2d(1, 1));
    short_window.back() = Eigen::Vector2d(100, 100);
    CHECK(vrf_lambda(short_window, 5, 25, thr, 0.02) == 1.0);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    std::vector<Eigen::Vector2d> calm;
    for (int i = 0; i < 25; ++i) calm.emplace_back(n01(rng), n01(rng));
    CHECK(variance_ratio(calm, 5, 25) < thr);
    CHECK(vrf_lambda(calm, 5, 25, thr, 0.02) == 1.0);

    // Short-window spread 100x the rest: the statistic exceeds the threshold.
    std::vector<Eigen::Vector2d> burst;
    for (int i = 0; i < 20; ++i) burst.emplace_back(0.1 * n01(rng), 0.1 * n01(rng));
    for (int i = 0; i < 5; ++i) burst.emplace_back(10.0 * n01(rng), 10.0 * n01(rng));
    const double f = variance_ratio(burst, 5, 25);
    CHECK(f > thr);
    const double lambda = vrf_lambda(burst, 5, 25, thr, 0.02);
    CHECK(lambda < 1.0);
    CHECK(lambda == doctest::Approx(1.0 / (1.0 + 0.02 * (f - thr))));

    CHECK(vrf_lambda(burst, 5, 25, 0.0, 1e6) == kLambdaFloor);

    ForgettingSchedule sched(5, 25, 0.02, 0.02);
    CHECK(sched.threshold() == thr);
    for (int i = 0; i < 40; ++i) {
        const double l = sched.push(Eigen::Vector2d(n01(rng), n01(rng)));
        if (i < 24) CHECK(l == 1.0);
        CHECK(l > 0.0);
        CHECK(l <= 1.0);
    }
    CHECK(sched.window().size() == 25);
}

TEST_CASE("data assimilation")
{
    const auto a = kf_data_assim(0.0, 1.0, 0.1, 1.0, 0.0);
    CHECK(a.k_da == -0.5);
    CHECK(a.p_da == 0.5);
    CHECK(a.p_fc_next == doctest::Approx(0.6));

    const auto b = kf_data_assim(2.0, 1.0, 0.0, 1e300, 5.0);
    CHECK(b.k_da == doctest::Approx(0.0));
    CHECK(b.x_da == doctest::Approx(2.0));

    const auto c = kf_data_assim(2.0, 0.0, 0.0, 1.0, 5.0);
    CHECK(c.k_da == 0.0);
    CHECK(c.p_da == 0.0);
    CHECK(c.x_da == 2.0);

    CHECK(kf_data_assim(1.0, 0.0, 0.0, 0.0, 3.0).k_da == 0.0);
    const auto d = kf_data_assim(1.0, 2.0, 0.0, 0.0, 3.0);
    CHECK(d.k_da == -1.0);
    CHECK(d.x_da == -2.0);
}

TEST_CASE("covariance adaptation")
{
    const std::vector<double> grid{0.1, 1.0};
    const auto tie = adapt_covariances(2.0, 0.5, grid, 0.5);
    CHECK(tie.eta == 0.1);
    CHECK(tie.v2 == doctest::Approx(1.4).epsilon(1e-15));

    CHECK(adapt_covariances(2.0, 0.5, grid, 1.0).eta == 1.0);
    CHECK(adapt_covariances(2.0, 0.5, grid, 0.0).eta == 0.1);

    const auto empty = adapt_covariances(0.05, 0.5, grid, 0.5);
    CHECK(empty.v2 == 0.0);
    CHECK(empty.eta == 0.1);

    const auto g = make_eta_grid(1e-8, 1e4, 50);
    REQUIRE(g.size() == 50);
    CHECK(g.front() == 1e-8);
    CHECK(g.back() == 1e4);
    for (std::size_t i = 1; i < g.size(); ++i) {
        CHECK(g[i] / g[i - 1] == doctest::Approx(std::pow(1e12, 1.0 / 49)).epsilon(1e-9));
    }
    CHECK(make_eta_grid(0.0, 1.0, 50).front() == 1e-12);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int i = 0; i < 500; ++i) {
        const double s = u(rng), p = u(rng) * 0.5;
        const auto r = adapt_covariances(s, p, g, 0.55);
        CHECK(r.eta >= 1e-8);
        CHECK(r.eta <= 1e4);
        CHECK(r.v2 >= 0.0);
        if (r.v2 > 0.0) {
            CHECK(s - (p + r.eta) - r.v2 == 0.0);
        }
    }
}

TEST_CASE("running variance matches a two-pass computation")
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(3.0, 2.0);
    RunningVariance rv;
    std::vector<double> xs;
    for (int i = 0; i < 1000; ++i) {
        xs.push_back(n(rng));
        rv.push(xs.back());
    }
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    CHECK(rv.mean() == doctest::Approx(mean).epsilon(1e-12));
    CHECK(rv.variance() == doctest::Approx(ss / (xs.size() - 1)).epsilon(1e-12));

    RunningVariance single;
    single.push(4.0);
    CHECK(single.variance() == 0.0);
}

TEST_CASE("reference process noise")
{
    const std::vector<double> ex{1.0, -1.0, 1.0, -1.0};
    const std::vector<double> ed{2.0, -2.0, 2.0, -2.0};
    CHECK(reference_process_noise(ex, ed, 0.5) == doctest::Approx(0.25 * 4.0 + 2.0 * 2.0 * 0.5));
    CHECK_THROWS((void)reference_process_noise(ex, std::vector<double>{1.0}, 1.0));
}

TEST_CASE("estimator fixed point and constant input")
{
    Estimator zero(example2_params());
    for (int k = 0; k < 500; ++k) {
        CHECK(zero.step(0.0) == 0.0);
    }

    Estimator c(example1_params());
    double last = 1.0;
    for (int k = 0; k < 3000; ++k) last = c.step(4.2);
    CHECK(std::abs(last) < 1e-3);

    Estimator bad(example1_params());
    CHECK_THROWS_AS(bad.step(std::nan("")), std::domain_error);
    CHECK_THROWS_AS(bad.step(INFINITY), std::domain_error);
}

TEST_CASE("estimator invariants on a noisy signal")
{
    for (const auto& params : {example1_params(), example2_params()}) {
        Estimator est(params);
        int violations = 0;
        est.set_observer([&](const StepDiagnostics& d) {
            const Eigen::MatrixXd& P = *d.P;
            const bool spd = (P - P.transpose()).norm() <= 1e-9 * P.norm() &&
                             Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(P).eigenvalues().minCoeff() > 0.0;
            if (!spd || !(d.lambda > 0.0 && d.lambda <= 1.0) || !(d.k_da > -1.0 && d.k_da <= 0.0) ||
                !(d.p_da <= d.p_fc && d.p_da >= 0.0) || d.v2 < 0.0 ||
                !(d.eta >= std::max(params.eta_l, 1e-12) && d.eta <= params.eta_u) || d.covariance_reset) {
                ++violations;
            }
        });
        std::mt19937_64 rng(9);
        std::normal_distribution<double> n01;
        for (int k = 0; k < 3000; ++k) {
            const double t = k * params.t_s;
            (void)est.step(std::sin(0.7 * t) + 0.3 * n01(rng));
        }
        CHECK(violations == 0);
    }
}

TEST_CASE("estimator differentiates a ramp with a light input weight")
{
    AiseParams p = example1_params();
    p.t_s = 0.01;
    Estimator est(p);
    double worst = 0.0;
    for (int k = 0; k < 2000; ++k) {
        const double d = est.step(k * p.t_s);
        if (k >= 1000) worst = std::max(worst, std::abs(d - 1.0));
    }
    CHECK(worst < 0.05);
}

TEST_CASE("csv observer")
{
    std::ostringstream out;
    Estimator est(example1_params());
    est.set_observer(csv_observer(out, 3));
    (void)est.step(1.0);
    (void)est.step(2.0);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "k,y,z,dhat,lambda,eta,v2,k_da,theta_0,theta_1,theta_2");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2);
}
