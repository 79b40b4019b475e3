#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tcert/errors.hpp"

namespace tcert {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Markov regime-switching market model: per-regime rate r(i) and volatility
/// matrix σ(i), plus the chain generator Λ. Validation populates the derived
/// diffusion matrices a(i) = σ(i)σ(i)ᵀ, their Cholesky factors and inverses,
/// and the exit rates λ_i = |λ_ii|.
struct RegimeModel {
    int d = 0;  // asset count
    int k = 0;  // regime count
    std::vector<double> r;
    std::vector<Mat> sigma;
    Mat lambda;

    // derived, populated by validate_model
    std::vector<Mat> a;
    std::vector<Mat> chol_a;  // lower-triangular factor of a(i)
    std::vector<Mat> a_inv;
    std::vector<double> exit_rate;  // λ_i
    bool validated = false;

    double min_rate() const;
    double max_rate() const;
    /// max_i a_ll(i) for asset l
    double max_diffusion(int l) const;
    double max_exit_rate() const;
};

/// Checks all model invariants (generator rows sum to zero with nonnegative
/// off-diagonals, σ(i) invertible, a(i) SPD, rates nonnegative) and fills the
/// derived fields. Throws RowSumViolation / NegativeOffDiagonal /
/// SingularVolatility / NegativeRate naming the offending regime or row.
/// Idempotent: validating an already validated model changes nothing.
RegimeModel validate_model(RegimeModel model);

/// Linear envelope constants for the terminal payoff:
///   -k3 + k4·s  <=  K(s)  <=  k1 + k2·s   for all s > 0.
struct GrowthBounds {
    double k1 = 0.0;
    Vec k2;
    double k3 = 0.0;
    Vec k4;
};

enum class PayoffKind { BasketCall, BasketPut, VanillaCall, VanillaPut, CustomTable };

/// Terminal payoff K(s); nonnegative and Lipschitz by construction for the
/// structured kinds. Custom tables are piecewise linear in the basket value
/// w·s and must come with user-declared growth bounds.
struct Payoff {
    PayoffKind kind = PayoffKind::VanillaCall;
    Vec weights;    // per asset
    double strike = 0.0;
    std::vector<std::pair<double, double>> table;  // (w·s, value), increasing in first
    std::optional<GrowthBounds> declared_growth;

    static Payoff vanilla_call(double strike);
    static Payoff vanilla_put(double strike);
    static Payoff basket_call(Vec weights, double strike);
    static Payoff basket_put(Vec weights, double strike);
};

/// K(s) for s > 0 componentwise; throws NonPositivePrice otherwise.
double evaluate_payoff(const Payoff& payoff, const Vec& s);

/// Envelope constants for the linear growth inequality above. Structured
/// kinds are closed form; custom tables must declare bounds, which are
/// verified by sampling. Throws UnboundedPayoff for undeclared custom tables
/// or if the declared bounds fail the sample check.
GrowthBounds payoff_growth_bounds(const Payoff& payoff, int d);

/// Truncated box R = Π (s_lo_l, s_hi_l) with time horizon T. The priced
/// boundary Γ is ∂R ∩ (0,∞)^d: zero facets are excluded.
struct TruncatedDomain {
    Vec s_lo;
    Vec s_hi;
    double horizon = 0.0;

    bool contains(const Vec& s) const;        // closure membership
    bool strictly_inside(const Vec& s) const;
};

/// Discrete solution values on (time grid) × (space grid) × (regime), with
/// multilinear interpolation in log-price coordinates. Grids are increasing;
/// a leading zero space node (degenerate facet) falls back to linear-in-s
/// interpolation inside its first cell. Queries outside the grid extrapolate
/// linearly in the same coordinates; `out_of_range` counts such events.
struct PriceField {
    std::vector<double> t_grid;
    std::vector<std::vector<double>> s_grid;
    int regimes = 1;
    std::vector<double> values;  // index ((ti*regimes + i)*n_space + flat)

    std::size_t n_space() const;
    std::size_t flat_index(const std::vector<int>& idx) const;
    double& at(int ti, int regime, std::size_t flat);
    double at(int ti, int regime, std::size_t flat) const;
    /// Space coordinates of a flat index.
    Vec node(std::size_t flat) const;

    static PriceField zeros(std::vector<double> t_grid, std::vector<std::vector<double>> s_grid,
                            int regimes);

    double interpolate(double t, const Vec& x, int regime,
                       std::atomic<long>* out_of_range = nullptr) const;

    bool all_finite() const;
};

/// Parsed contents of the structured-text model configuration.
struct MarketConfig {
    RegimeModel model;
    Payoff payoff;
    TruncatedDomain domain;
};

/// Reads the JSON-syntax config schema
///   {"d":..,"k":..,"r":[..],"sigma":[[[..]]],"lambda":[[..]],
///    "payoff":{"kind":..,"weights":[..],"strike":..},
///    "domain":{"s_lo":[..],"s_hi":[..],"T":..}}
/// and validates the model. Throws ConfigError on schema problems and the
/// validation errors on bad parameters.
MarketConfig load_market_config(const std::string& json_text);
MarketConfig load_market_config_file(const std::string& path);

}  // namespace tcert
