#pragma once

#include <functional>

#include "tcert/model.hpp"

namespace tcert {

enum class BoundaryKind { PayoffExtension, DiscountedLinearEnvelope, Zero, CustomGrid };

/// Artificial Dirichlet data h on the priced boundary Γ = ∂R ∩ (0,∞)^d.
/// The structured kinds are closed-form evaluable anywhere; CustomGrid wraps
/// a caller-supplied evaluator (typically an interpolated grid of values).
struct BoundaryData {
    BoundaryKind kind = BoundaryKind::DiscountedLinearEnvelope;
    std::function<double(double t, const Vec& s, int i)> custom;

    static BoundaryData payoff_extension() { return {BoundaryKind::PayoffExtension, {}}; }
    static BoundaryData discounted_linear_envelope() {
        return {BoundaryKind::DiscountedLinearEnvelope, {}};
    }
    static BoundaryData zero() { return {BoundaryKind::Zero, {}}; }
    static BoundaryData custom_fn(std::function<double(double, const Vec&, int)> fn) {
        return {BoundaryKind::CustomGrid, std::move(fn)};
    }

    double value(const RegimeModel& model, const Payoff& payoff, const GrowthBounds& growth,
                 double horizon, double t, const Vec& s, int i) const;
};

enum class FdScheme { ImplicitEuler, CrankNicolson };
enum class RegimeCoupling { ImplicitBlock, ExplicitLagged };

struct FdConfig {
    int time_steps = 200;
    std::vector<int> space_nodes = {201};
    FdScheme scheme = FdScheme::CrankNicolson;
    RegimeCoupling coupling = RegimeCoupling::ImplicitBlock;

    void check(int d) const;
};

struct FdResult {
    PriceField field;
    bool cfl_warning = false;  // explicit-lagged with max λ_i · Δt > 1
};

/// Backward time-march for the truncated problem: terminal data K(s),
/// Dirichlet data h on Γ, central differences in space (4-point stencil for
/// the cross term, handled explicitly within the step), regime coupling per
/// config. Zero facets (s_l = 0) carry the degenerate reduced equation
/// instead of Dirichlet data. Supports d ≤ 2.
FdResult solve_ibvp(const RegimeModel& model, const Payoff& payoff, const TruncatedDomain& domain,
                    const BoundaryData& boundary, const FdConfig& config);

struct ProbePoint {
    double t;
    Vec s;
    int regime = 0;
};

/// |ψ_small − ψ_large| at each probe: solves on both domains with matched
/// spatial resolution and interpolates the large-domain reference at the
/// probes. Probes must lie inside the small domain (ProbeOutsideDomain).
std::vector<double> measured_truncation_error(const RegimeModel& model, const Payoff& payoff,
                                              const TruncatedDomain& domain_small,
                                              const TruncatedDomain& domain_large,
                                              const BoundaryData& boundary,
                                              const FdConfig& config,
                                              const std::vector<ProbePoint>& probes);

}  // namespace tcert
