#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace escaise::noise {

// Piecewise-constant standard deviation. Segment i covers
// [k_start_i, k_start_{i+1}) and the last one is open-ended.
struct Segment {
    long k_start;
    double sigma;
};

class Schedule {
public:
    Schedule() = default;
    explicit Schedule(std::vector<Segment> segments);

    [[nodiscard]] double sigma(long k) const;
    [[nodiscard]] const std::vector<Segment>& segments() const { return segments_; }
    [[nodiscard]] bool silent() const;

private:
    std::vector<Segment> segments_;
};

[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x);

// Seed of trial i in a batch started from base_seed.
[[nodiscard]] inline std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t i)
{
    return splitmix64(base_seed + i);
}

// Wichura's AS241 (PPND16) inverse of the standard normal CDF, p in (0,1).
[[nodiscard]] double inverse_normal(double p);

// Draws v_k = sigma(k) * n_k with one standard normal per step, in strict k
// order, from mt19937_64 through a 53-bit uniform on (0,1).
class Sampler {
public:
    Sampler(Schedule schedule, std::uint64_t seed);

    double next();
    [[nodiscard]] long step() const { return k_; }

private:
    Schedule schedule_;
    std::mt19937_64 rng_;
    long k_ = 0;
};

[[nodiscard]] double standard_normal(std::mt19937_64& rng);

}  // namespace escaise::noise
