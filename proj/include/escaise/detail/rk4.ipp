#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace escaise::plants {

namespace detail {

template <std::size_t N>
Vec<N> checked(const Vec<N>& d)
{
    for (double v : d) {
        if (!std::isfinite(v)) {
            throw std::domain_error("rk4_step: non-finite derivative");
        }
    }
    return d;
}

template <std::size_t N>
Vec<N> axpy(const Vec<N>& x, double a, const Vec<N>& d)
{
    Vec<N> out;
    for (std::size_t i = 0; i < N; ++i) {
        out[i] = x[i] + a * d[i];
    }
    return out;
}

}  // namespace detail

template <std::size_t N>
Vec<N> rk4_step(const Rhs<N>& f, double t, const Vec<N>& x, double dt)
{
    if (!(dt > 0.0)) {
        throw std::invalid_argument("rk4_step: dt must be > 0");
    }
    const Vec<N> k1 = detail::checked(f(t, x));
    const Vec<N> k2 = detail::checked(f(t + 0.5 * dt, detail::axpy(x, 0.5 * dt, k1)));
    const Vec<N> k3 = detail::checked(f(t + 0.5 * dt, detail::axpy(x, 0.5 * dt, k2)));
    const Vec<N> k4 = detail::checked(f(t + dt, detail::axpy(x, dt, k3)));
    Vec<N> out;
    for (std::size_t i = 0; i < N; ++i) {
        out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return out;
}

}  // namespace escaise::plants
