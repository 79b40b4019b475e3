#pragma once

#include <atomic>

#include "tcert/model.hpp"

namespace tcert {

/// Discretization of the integral-equation solve: uniform time grid on
/// [0, T], log-uniform space grid per dimension, composite Simpson in the
/// elapsed-time variable and tensor Gauss-Hermite in space.
struct IeConfig {
    int t_count = 41;
    std::vector<double> log_lo;  // per-dimension ln(s) range
    std::vector<double> log_hi;
    std::vector<int> s_count;
    int v_panels = 24;       // Simpson subintervals, even
    int x_quad_order = 24;
    int eta_quad_order = 48;
    double tol = 1e-7;       // V-norm stopping threshold
    int max_iter = 80;
    int threads = 1;

    /// Grid covering the domain of interest padded by three lognormal
    /// standard deviations at the horizon, so quadrature nodes rarely leave
    /// the grid. A zero lower bound is replaced by a small positive anchor.
    static IeConfig for_domain(const RegimeModel& model, const TruncatedDomain& domain,
                               int t_count = 41, int s_count = 129);

    void check() const;
};

/// sup over grid nodes and regimes of |values| / (1 + ||s||_1): the discrete
/// counterpart of the linear-growth-weighted sup norm.
double v_norm(const PriceField& field);

struct IterationRecord {
    int iter;
    double v_norm_diff;
    double wall_ms;
};

struct IeResult {
    PriceField field;
    std::vector<IterationRecord> history;
    bool converged = false;
    double achieved = 0.0;           // last V-norm difference
    long interp_out_of_range = 0;
};

/// Fixed-point machinery for the pricing integral equation. The operator
/// application evaluates, at every grid node (t, s, i),
///   e^{-λ_i (T-t)} η_i(t,s)
///   + ∫_0^{T-t} e^{-(λ_i+r(i)) v} Σ_{j≠i} λ_ij ∫ φ(t+v, x, j) α(x,s,i,v) dx dv,
/// with the inner integral by Gauss-Hermite against interpolated field values
/// and the outer one by composite Simpson whose v = 0 node takes the limit
/// value φ(t, s, j).
class IeEngine {
public:
    IeEngine(const RegimeModel& model, const Payoff& payoff, double horizon, IeConfig config);

    const std::vector<double>& t_grid() const { return t_grid_; }
    const std::vector<std::vector<double>>& s_grid() const { return s_grid_; }

    /// Frozen-regime seed field η_i(t, s) on the engine grids.
    const PriceField& eta_field() const { return eta_field_; }

    PriceField apply_A(const PriceField& field) const;

    /// Picard iteration from φ_0 = η until the V-norm of successive
    /// differences drops below tol or max_iter is reached; `converged`
    /// reports which, `achieved` the final difference norm.
    IeResult solve() const;

    long out_of_range_count() const { return out_of_range_.load(); }

private:
    void apply_slice(const PriceField& in, PriceField& out, int ti) const;

    RegimeModel model_;
    Payoff payoff_;
    double horizon_;
    IeConfig config_;
    std::vector<double> t_grid_;
    std::vector<std::vector<double>> s_grid_;
    PriceField eta_field_;
    // log-uniform grid geometry and precomputed quadrature offsets; the hot
    // loop works directly in ln(s) coordinates
    std::vector<double> u_lo_, du_;
    std::vector<std::size_t> stride_;
    std::vector<double> quad_weight_;
    std::vector<std::vector<double>> quad_offset_;  // per regime: sqrt(2) (chol_a xi_q)_l
    mutable std::atomic<long> out_of_range_{0};
};

}  // namespace tcert
