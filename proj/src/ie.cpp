#include "tcert/ie.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "tcert/bsm.hpp"
#include "tcert/gauss_hermite.hpp"

namespace tcert {

IeConfig IeConfig::for_domain(const RegimeModel& model, const TruncatedDomain& domain, int t_count,
                              int s_count) {
    IeConfig cfg;
    cfg.t_count = t_count;
    for (int l = 0; l < model.d; ++l) {
        double spread = 0.0;
        for (int i = 0; i < model.k; ++i)
            spread = std::max(spread, std::sqrt(model.a[i](l, l) * domain.horizon));
        const double lo = domain.s_lo[l] > 0.0 ? domain.s_lo[l] : domain.s_hi[l] / 200.0;
        cfg.log_lo.push_back(std::log(lo) - 3.0 * spread);
        cfg.log_hi.push_back(std::log(domain.s_hi[l]) + 3.0 * spread);
        cfg.s_count.push_back(s_count);
    }
    return cfg;
}

void IeConfig::check() const {
    if (tol <= 0.0) throw ConfigError("ie tolerance must be positive");
    if (t_count < 2) throw ConfigError("ie time grid needs at least 2 nodes");
    if (v_panels < 2 || v_panels % 2 != 0)
        throw ConfigError("ie v-quadrature needs an even panel count >= 2");
    if (log_lo.empty() || log_lo.size() != log_hi.size() || log_lo.size() != s_count.size())
        throw ConfigError("ie grid specification is incomplete");
    for (std::size_t l = 0; l < s_count.size(); ++l) {
        if (s_count[l] < 2) throw ConfigError("ie space grid needs at least 2 nodes");
        if (log_lo[l] >= log_hi[l]) throw ConfigError("ie grid range is empty");
    }
}

double v_norm(const PriceField& field) {
    const std::size_t ns = field.n_space();
    double best = 0.0;
    std::vector<double> weight(ns);
    for (std::size_t f = 0; f < ns; ++f) weight[f] = 1.0 + field.node(f).lpNorm<1>();
    for (std::size_t ti = 0; ti < field.t_grid.size(); ++ti)
        for (int i = 0; i < field.regimes; ++i)
            for (std::size_t f = 0; f < ns; ++f)
                best = std::max(best, std::abs(field.at(static_cast<int>(ti), i, f)) / weight[f]);
    return best;
}

IeEngine::IeEngine(const RegimeModel& model, const Payoff& payoff, double horizon, IeConfig config)
    : model_(model), payoff_(payoff), horizon_(horizon), config_(std::move(config)) {
    if (!model_.validated) throw ConfigError("ie engine needs a validated model");
    if (model_.d > 3)
        throw QuadratureDimension("tensor quadrature supports d <= 3; use the MC pricer");
    config_.check();
    t_grid_.resize(config_.t_count);
    for (int m = 0; m < config_.t_count; ++m)
        t_grid_[m] = horizon_ * m / (config_.t_count - 1);
    s_grid_.resize(model_.d);
    for (int l = 0; l < model_.d; ++l) {
        s_grid_[l].resize(config_.s_count[l]);
        for (int n = 0; n < config_.s_count[l]; ++n) {
            const double u = config_.log_lo[l] + (config_.log_hi[l] - config_.log_lo[l]) * n /
                                                     (config_.s_count[l] - 1);
            s_grid_[l][n] = std::exp(u);
        }
    }
    eta_field_ = PriceField::zeros(t_grid_, s_grid_, model_.k);
    const std::size_t ns = eta_field_.n_space();
    const int workers = std::max(1, config_.threads);
    std::atomic<std::size_t> cursor{0};
    auto fill = [&] {
        for (;;) {
            const std::size_t f = cursor.fetch_add(1);
            if (f >= ns) return;
            const Vec s = eta_field_.node(f);
            for (int m = 0; m < config_.t_count; ++m)
                for (int i = 0; i < model_.k; ++i)
                    eta_field_.at(m, i, f) =
                        eta(model_, payoff_, horizon_, t_grid_[m], s, i, config_.eta_quad_order);
        }
    };
    if (workers == 1) {
        fill();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(fill);
        for (auto& th : pool) th.join();
    }

    u_lo_ = config_.log_lo;
    du_.resize(model_.d);
    for (int l = 0; l < model_.d; ++l)
        du_[l] = (config_.log_hi[l] - config_.log_lo[l]) / (config_.s_count[l] - 1);
    stride_.assign(model_.d, 1);
    for (int l = model_.d - 2; l >= 0; --l)
        stride_[l] = stride_[l + 1] * static_cast<std::size_t>(config_.s_count[l + 1]);

    GaussianExpectation quad(model_.d, config_.x_quad_order);
    quad_weight_ = quad.weight();
    quad_offset_.resize(model_.k);
    const std::size_t nq = quad.size();
    for (int i = 0; i < model_.k; ++i) {
        quad_offset_[i].resize(nq * model_.d);
        for (std::size_t q = 0; q < nq; ++q)
            for (int l = 0; l < model_.d; ++l) {
                double acc = 0.0;
                for (int mm = 0; mm <= l; ++mm)
                    acc += model_.chol_a[i](l, mm) * quad.xi()[q * model_.d + mm];
                quad_offset_[i][q * model_.d + l] = 1.4142135623730951 * acc;
            }
    }
}

void IeEngine::apply_slice(const PriceField& in, PriceField& out, int ti) const {
    const double t = t_grid_[ti];
    const double tau = horizon_ - t;
    const std::size_t ns = out.n_space();
    const int k = model_.k;
    const int d = model_.d;

    if (tau <= 0.0) {
        for (int i = 0; i < k; ++i)
            for (std::size_t f = 0; f < ns; ++f) out.at(ti, i, f) = eta_field_.at(ti, i, f);
        return;
    }

    const int panels = config_.v_panels;
    const double dv = tau / panels;
    const std::size_t nq = quad_weight_.size();
    const int nt = static_cast<int>(t_grid_.size());
    long oor = 0;

    // time cell and weight for each Simpson node, shared across space
    std::vector<int> tcell(panels + 1);
    std::vector<double> tw(panels + 1);
    for (int p = 1; p <= panels; ++p) {
        const double tq = t + p * dv;
        int tc = std::min(nt - 2, std::max(0, static_cast<int>((tq / horizon_) * (nt - 1))));
        if (tq < t_grid_[tc]) --tc;
        if (tq > t_grid_[tc + 1]) ++tc;
        tc = std::min(nt - 2, std::max(0, tc));
        tcell[p] = tc;
        tw[p] = std::clamp((tq - t_grid_[tc]) / (t_grid_[tc + 1] - t_grid_[tc]), 0.0, 1.0);
    }

    std::vector<double> inner(k);
    double u_s[3], u_query[3], wgt[3];

    for (std::size_t f = 0; f < ns; ++f) {
        {
            std::size_t rem = f;
            for (int l = 0; l < d; ++l) {
                const std::size_t n_l = s_grid_[l].size();
                u_s[l] = u_lo_[l] + du_[l] * static_cast<double>((rem / stride_[l]) % n_l);
                rem %= stride_[l];
            }
        }
        for (int i = 0; i < k; ++i) {
            double integral = 0.0;
            for (int p = 0; p <= panels; ++p) {
                const double simpson_w = (p == 0 || p == panels) ? 1.0 : (p % 2 == 1 ? 4.0 : 2.0);
                double coupling = 0.0;
                if (p == 0) {
                    // v -> 0 limit of the x-integral is the field at the node
                    for (int j = 0; j < k; ++j) {
                        if (j == i) continue;
                        coupling += model_.lambda(i, j) * in.at(ti, j, f);
                    }
                } else {
                    const double v = p * dv;
                    const double sqv = std::sqrt(v);
                    double shift[3];
                    for (int l = 0; l < d; ++l)
                        shift[l] = u_s[l] + (model_.r[i] - 0.5 * model_.a[i](l, l)) * v;
                    for (int j = 0; j < k; ++j) inner[j] = 0.0;
                    const int tc = tcell[p];
                    const double tfrac = tw[p];
                    const double* offs = quad_offset_[i].data();
                    for (std::size_t q = 0; q < nq; ++q) {
                        std::size_t base = 0;
                        for (int l = 0; l < d; ++l) {
                            u_query[l] = shift[l] + sqv * offs[q * d + l];
                            double pos = (u_query[l] - u_lo_[l]) / du_[l];
                            const int n_l = static_cast<int>(s_grid_[l].size());
                            int c = static_cast<int>(pos);
                            if (pos < 0.0 || pos > n_l - 1) ++oor;
                            c = std::min(n_l - 2, std::max(0, c));
                            wgt[l] = pos - c;  // may leave [0,1]: linear extrapolation
                            base += stride_[l] * static_cast<std::size_t>(c);
                        }
                        const double wq = quad_weight_[q];
                        // multilinear gather over 2^d corners, two time levels
                        const int corners = 1 << d;
                        for (int j = 0; j < k; ++j) {
                            if (j == i) continue;
                            const double* v0 = &in.values[(static_cast<std::size_t>(tc) * k + j) * ns];
                            const double* v1 = v0 + static_cast<std::size_t>(k) * ns;
                            double acc = 0.0;
                            for (int c = 0; c < corners; ++c) {
                                double w = 1.0;
                                std::size_t at = base;
                                for (int l = 0; l < d; ++l) {
                                    if ((c >> l) & 1) {
                                        w *= wgt[l];
                                        at += stride_[l];
                                    } else {
                                        w *= 1.0 - wgt[l];
                                    }
                                }
                                acc += w * ((1.0 - tfrac) * v0[at] + tfrac * v1[at]);
                            }
                            inner[j] += wq * acc;
                        }
                    }
                    const double decay = std::exp(-(model_.exit_rate[i] + model_.r[i]) * v);
                    for (int j = 0; j < k; ++j) {
                        if (j == i) continue;
                        coupling += model_.lambda(i, j) * decay * inner[j];
                    }
                }
                integral += simpson_w * coupling;
            }
            integral *= dv / 3.0;
            out.at(ti, i, f) =
                std::exp(-model_.exit_rate[i] * tau) * eta_field_.at(ti, i, f) + integral;
        }
    }
    if (oor) out_of_range_.fetch_add(oor, std::memory_order_relaxed);
}

PriceField IeEngine::apply_A(const PriceField& field) const {
    PriceField out = PriceField::zeros(t_grid_, s_grid_, model_.k);
    const int nt = static_cast<int>(t_grid_.size());
    const int workers = std::max(1, config_.threads);
    if (workers == 1) {
        for (int ti = 0; ti < nt; ++ti) apply_slice(field, out, ti);
        return out;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const int ti = next.fetch_add(1);
                if (ti >= nt) return;
                apply_slice(field, out, ti);
            }
        });
    for (auto& th : pool) th.join();
    return out;
}

IeResult IeEngine::solve() const {
    IeResult result;
    PriceField current = eta_field_;
    for (int iter = 1; iter <= config_.max_iter; ++iter) {
        const auto start = std::chrono::steady_clock::now();
        PriceField next = apply_A(current);
        PriceField diff = next;
        for (std::size_t n = 0; n < diff.values.size(); ++n) diff.values[n] -= current.values[n];
        const double dn = v_norm(diff);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        result.history.push_back({iter, dn, ms});
        current = std::move(next);
        result.achieved = dn;
        if (dn < config_.tol) {
            result.converged = true;
            break;
        }
    }
    result.field = std::move(current);
    result.interp_out_of_range = out_of_range_.load();
    return result;
}

}  // namespace tcert
