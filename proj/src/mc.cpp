#include "tcert/mc.hpp"

#include <cmath>
#include <thread>

#include "tcert/kernel.hpp"

namespace tcert {

namespace {
constexpr long kBatchSize = 8192;

struct Kahan {
    double sum = 0.0, carry = 0.0;
    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};
}  // namespace

ChainPath simulate_chain(const RegimeModel& model, double t, double horizon, int i0,
                         rng::Xoshiro256pp& gen) {
    ChainPath path;
    path.initial = i0;
    double now = t;
    int state = i0;
    for (;;) {
        const double rate = model.exit_rate[state];
        if (rate <= 0.0) break;  // absorbing
        const double hold = gen.next_exponential(rate);
        if (now + hold >= horizon) break;
        now += hold;
        // next state j != state with probability lambda_ij / lambda_i
        double u = gen.next_double() * rate;
        int next = -1;
        for (int j = 0; j < model.k; ++j) {
            if (j == state) continue;
            u -= model.lambda(state, j);
            if (u <= 0.0) {
                next = j;
                break;
            }
        }
        if (next < 0) {  // numerical leftover lands on the last admissible state
            next = model.k - 1;
            if (next == state) next = model.k - 2;
        }
        path.jump_times.push_back(now);
        path.states.push_back(next);
        state = next;
    }
    return path;
}

namespace {

/// Runs n_paths simulations and accumulates `n_stats` per-path statistics
/// (value and square) batch-by-batch. The reduction order is fixed by the
/// batch partition, independent of the worker count.
template <class StatFn>
void run_paths(const RegimeModel& model, double horizon, double t, const Vec& s, int i,
               long n_paths, std::uint64_t seed, int threads, int n_stats, StatFn&& stat,
               double* out_sum, double* out_sumsq) {
    const long n_batches = (n_paths + kBatchSize - 1) / kBatchSize;
    std::vector<double> batch_sum(static_cast<std::size_t>(n_batches) * n_stats, 0.0);
    std::vector<double> batch_sumsq(static_cast<std::size_t>(n_batches) * n_stats, 0.0);

    auto worker = [&](long b0, long b1) {
        std::vector<double> stats(n_stats);
        for (long b = b0; b < b1; ++b) {
            auto gen = rng::Xoshiro256pp::stream(seed, static_cast<std::uint64_t>(b));
            const long begin = b * kBatchSize;
            const long end = std::min(n_paths, begin + kBatchSize);
            Kahan sum[4], sumsq[4];
            for (long p = begin; p < end; ++p) {
                // piecewise-constant regime intervals, one lognormal step each
                double now = t;
                int state = i;
                Vec assets = s;
                double disc = 0.0;
                for (;;) {
                    const double rate = model.exit_rate[state];
                    double hold = horizon - now;
                    int next = -1;
                    if (rate > 0.0) {
                        const double draw = gen.next_exponential(rate);
                        if (draw < hold) {
                            hold = draw;
                            double u = gen.next_double() * rate;
                            for (int j = 0; j < model.k; ++j) {
                                if (j == state) continue;
                                u -= model.lambda(state, j);
                                if (u <= 0.0) {
                                    next = j;
                                    break;
                                }
                            }
                            if (next < 0) {
                                next = model.k - 1;
                                if (next == state) next = model.k - 2;
                            }
                        }
                    }
                    if (hold > 0.0) assets = sample_step(model, assets, state, hold, gen);
                    disc += model.r[state] * hold;
                    now += hold;
                    if (next < 0) break;
                    state = next;
                }
                stat(assets, disc, stats.data());
                for (int m = 0; m < n_stats; ++m) {
                    sum[m].add(stats[m]);
                    sumsq[m].add(stats[m] * stats[m]);
                }
            }
            for (int m = 0; m < n_stats; ++m) {
                batch_sum[b * n_stats + m] = sum[m].sum;
                batch_sumsq[b * n_stats + m] = sumsq[m].sum;
            }
        }
    };

    const int workers = std::max(1, threads);
    if (workers == 1 || n_batches == 1) {
        worker(0, n_batches);
    } else {
        std::vector<std::thread> pool;
        const long per = (n_batches + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const long b0 = w * per;
            const long b1 = std::min(n_batches, b0 + per);
            if (b0 >= b1) break;
            pool.emplace_back(worker, b0, b1);
        }
        for (auto& th : pool) th.join();
    }

    for (int m = 0; m < n_stats; ++m) {
        Kahan total, totalsq;
        for (long b = 0; b < n_batches; ++b) {
            total.add(batch_sum[b * n_stats + m]);
            totalsq.add(batch_sumsq[b * n_stats + m]);
        }
        out_sum[m] = total.sum;
        out_sumsq[m] = totalsq.sum;
    }
}

double std_error(double sum, double sumsq, long n) {
    if (n < 2) return 0.0;
    const double mean = sum / n;
    double var = (sumsq - n * mean * mean) / (n - 1);
    if (var < 0.0) var = 0.0;
    return std::sqrt(var / n);
}

}  // namespace

McEstimate price_mc(const RegimeModel& model, const Payoff& payoff, double horizon, double t,
                    const Vec& s, int i, long n_paths, std::uint64_t seed, int threads) {
    if (n_paths < 1) throw ConfigError("price_mc needs n_paths >= 1");
    if (t < 0.0 || t > horizon) throw ConfigError("pricing time must lie in [0, T]");
    double sum = 0.0, sumsq = 0.0;
    run_paths(
        model, horizon, t, s, i, n_paths, seed, threads, 1,
        [&](const Vec& assets, double disc, double* out) {
            out[0] = std::exp(-disc) * evaluate_payoff(payoff, assets);
        },
        &sum, &sumsq);
    McEstimate est;
    est.mean = sum / n_paths;
    est.std_error = std_error(sum, sumsq, n_paths);
    est.n_paths = n_paths;
    est.seed = seed;
    return est;
}

MartingaleStats martingale_residual(const RegimeModel& model, int asset, double horizon, double t,
                                    const Vec& s, int i, long n_paths, std::uint64_t seed,
                                    int threads) {
    double sum[2], sumsq[2];
    run_paths(
        model, horizon, t, s, i, n_paths, seed, threads, 2,
        [&](const Vec& assets, double disc, double* out) {
            out[0] = std::exp(-disc) * assets[asset];
            out[1] = assets[asset];
        },
        sum, sumsq);
    MartingaleStats ms;
    ms.n_paths = n_paths;
    ms.disc_mean = sum[0] / n_paths;
    ms.disc_se = std_error(sum[0], sumsq[0], n_paths);
    ms.undisc_mean = sum[1] / n_paths;
    ms.undisc_se = std_error(sum[1], sumsq[1], n_paths);
    ms.z = ms.disc_se > 0.0 ? (ms.disc_mean - s[asset]) / ms.disc_se : 0.0;
    return ms;
}

}  // namespace tcert
