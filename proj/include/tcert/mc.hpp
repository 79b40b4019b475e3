#pragma once

#include <cstdint>

#include "tcert/model.hpp"
#include "tcert/rng.hpp"

namespace tcert {

/// One realization of the regime chain on [t, T]: `initial` at time t, then
/// jump m at jump_times[m] into states[m]. Jump times are strictly
/// increasing and consecutive states differ.
struct ChainPath {
    int initial;
    std::vector<double> jump_times;
    std::vector<int> states;
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long n_paths = 0;
    std::uint64_t seed = 0;
};

/// Simulates the chain: holding time in state i ~ Exponential(λ_i), next
/// state j ≠ i with probability λ_ij / λ_i, absorbing when λ_i = 0.
ChainPath simulate_chain(const RegimeModel& model, double t, double horizon, int i0,
                         rng::Xoshiro256pp& gen);

/// Prices by the stochastic representation: simulate the chain, advance the
/// assets with one full-covariance lognormal step per constant-regime
/// interval, discount by the exact piecewise-constant rate integral, and
/// average the discounted payoffs. Paths are processed in fixed-size batches
/// with per-batch RNG streams derived from (seed, batch index) and reduced by
/// Kahan summation in batch order, so the estimate is bit-identical for any
/// worker count.
McEstimate price_mc(const RegimeModel& model, const Payoff& payoff, double horizon, double t,
                    const Vec& s, int i, long n_paths, std::uint64_t seed, int threads = 1);

struct MartingaleStats {
    double z = 0.0;             // (discounted mean - s_l) / std error
    double disc_mean = 0.0;
    double disc_se = 0.0;
    double undisc_mean = 0.0;   // sub-martingale check: >= s_l - 4 SE when rates > 0
    double undisc_se = 0.0;
    long n_paths = 0;
};

/// Standardized residual of the discounted-asset martingale property for
/// asset index `asset`, plus the undiscounted mean for the sub-martingale
/// check.
MartingaleStats martingale_residual(const RegimeModel& model, int asset, double horizon, double t,
                                    const Vec& s, int i, long n_paths, std::uint64_t seed,
                                    int threads = 1);

}  // namespace tcert
