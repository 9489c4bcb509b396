#include "escaise/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace escaise::noise {

Schedule::Schedule(std::vector<Segment> segments) : segments_(std::move(segments))
{
    if (segments_.empty() || segments_.front().k_start != 0) {
        throw std::invalid_argument("noise schedule must start at k = 0");
    }
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        if (!(segments_[i].sigma >= 0.0) || !std::isfinite(segments_[i].sigma)) {
            throw std::invalid_argument("noise schedule: sigma must be finite and >= 0");
        }
        if (i > 0 && segments_[i].k_start <= segments_[i - 1].k_start) {
            throw std::invalid_argument("noise schedule: segments must be strictly increasing");
        }
    }
}

double Schedule::sigma(long k) const
{
    double s = 0.0;
    for (const auto& seg : segments_) {
        if (seg.k_start > k) {
            break;
        }
        s = seg.sigma;
    }
    return s;
}

bool Schedule::silent() const
{
    return std::all_of(segments_.begin(), segments_.end(),
                       [](const Segment& s) { return s.sigma == 0.0; });
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double inverse_normal(double p)
{
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("inverse_normal: p must lie in (0,1)");
    }
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                    45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
                 133.14166789178437745) * r + 3.387132872796366608) /
               (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                    21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
                 42.313330701600911252) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x = 0.0;
    if (r <= 5.0) {
        r -= 1.6;
        x = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                 1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
              4.6303378461565452959) * r + 1.42343711074968357734) /
            (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                 0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
              2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                 0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
              5.4637849111641143699) * r + 6.6579046435011037772) /
            (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                 7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
              0.59983220655588793769) * r + 1.0);
    }
    return q < 0.0 ? -x : x;
}

double standard_normal(std::mt19937_64& rng)
{
    // (bits + 0.5) / 2^53 lies strictly inside (0,1).
    const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    return inverse_normal(u);
}

Sampler::Sampler(Schedule schedule, std::uint64_t seed) : schedule_(std::move(schedule)), rng_(seed) {}

double Sampler::next()
{
    const double n = standard_normal(rng_);
    return schedule_.sigma(k_++) * n;
}

}  // namespace escaise::noise
