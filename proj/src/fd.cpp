#include "tcert/fd.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <memory>

namespace tcert {

double BoundaryData::value(const RegimeModel& model, const Payoff& payoff,
                           const GrowthBounds& growth, double horizon, double t, const Vec& s,
                           int i) const {
    switch (kind) {
        case BoundaryKind::PayoffExtension:
            return evaluate_payoff(payoff, s.cwiseMax(1e-300));
        case BoundaryKind::DiscountedLinearEnvelope:
            return growth.k1 * std::exp(-model.min_rate() * (horizon - t)) + growth.k2.dot(s);
        case BoundaryKind::Zero:
            return 0.0;
        case BoundaryKind::CustomGrid:
            if (!custom) throw ConfigError("custom boundary data has no evaluator");
            return custom(t, s, i);
    }
    return 0.0;
}

void FdConfig::check(int d) const {
    if (time_steps < 1) throw ConfigError("fd needs at least one time step");
    if (static_cast<int>(space_nodes.size()) != d)
        throw ConfigError("fd space_nodes must have one entry per dimension");
    for (int n : space_nodes)
        if (n < 3) throw ConfigError("fd needs at least 3 space nodes per dimension");
    if (d > 2) throw ConfigError("fd supports d <= 2; use the IE or MC pricers");
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

enum class NodeRole { Interior, Dirichlet, Degenerate };

struct Assembly {
    int d, k;
    std::vector<std::vector<double>> grid;
    std::vector<int> strides;  // row-major space strides
    std::size_t n_space;
    std::vector<NodeRole> role;            // per space node
    std::vector<std::uint8_t> degenerate;  // per (node, dim): dim's terms dropped
    int size;                              // n_space * k

    int unknown(std::size_t flat, int regime) const {
        return static_cast<int>(flat) * k + regime;
    }
};

Assembly classify(const RegimeModel& model, const TruncatedDomain& domain,
                  const FdConfig& config) {
    Assembly as;
    as.d = model.d;
    as.k = model.k;
    as.grid.resize(as.d);
    for (int l = 0; l < as.d; ++l) {
        const int n = config.space_nodes[l];
        as.grid[l].resize(n);
        for (int j = 0; j < n; ++j)
            as.grid[l][j] = domain.s_lo[l] + (domain.s_hi[l] - domain.s_lo[l]) * j / (n - 1);
    }
    as.strides.assign(as.d, 1);
    for (int l = as.d - 2; l >= 0; --l)
        as.strides[l] = as.strides[l + 1] * config.space_nodes[l + 1];
    as.n_space = 1;
    for (int l = 0; l < as.d; ++l) as.n_space *= config.space_nodes[l];
    as.size = static_cast<int>(as.n_space) * as.k;

    as.role.assign(as.n_space, NodeRole::Interior);
    as.degenerate.assign(as.n_space * as.d, 0);
    for (std::size_t f = 0; f < as.n_space; ++f) {
        std::size_t rem = f;
        bool dirichlet = false, degenerate = false;
        for (int l = 0; l < as.d; ++l) {
            const int j = static_cast<int>(rem / as.strides[l]);
            rem %= as.strides[l];
            const int n = config.space_nodes[l];
            if (j == 0 && domain.s_lo[l] <= 0.0) {
                // zero facet: excluded from Γ, carries the reduced equation
                degenerate = true;
                as.degenerate[f * as.d + l] = 1;
            } else if (j == 0 || j == n - 1) {
                dirichlet = true;
            }
        }
        if (dirichlet)
            as.role[f] = NodeRole::Dirichlet;
        else if (degenerate)
            as.role[f] = NodeRole::Degenerate;
    }
    return as;
}

/// Spatial operator split into the implicit part and the explicit part
/// (cross-derivative terms; plus the regime coupling when lagged).
struct OperatorPair {
    std::vector<Triplet> implicit_part;
    std::vector<Triplet> explicit_part;
};

OperatorPair assemble_operator(const RegimeModel& model, const Assembly& as,
                               RegimeCoupling coupling) {
    OperatorPair op;
    const int d = as.d, k = as.k;
    std::vector<double> delta(d);
    for (int l = 0; l < d; ++l) delta[l] = as.grid[l][1] - as.grid[l][0];

    std::vector<int> idx(d);
    for (std::size_t f = 0; f < as.n_space; ++f) {
        if (as.role[f] == NodeRole::Dirichlet) continue;
        std::size_t rem = f;
        for (int l = 0; l < d; ++l) {
            idx[l] = static_cast<int>(rem / as.strides[l]);
            rem %= as.strides[l];
        }
        for (int i = 0; i < k; ++i) {
            const int row = as.unknown(f, i);
            // reaction
            op.implicit_part.emplace_back(row, row, -model.r[i]);
            // regime coupling (full Λ row, including the diagonal)
            for (int j = 0; j < k; ++j) {
                const double lam = model.lambda(i, j);
                if (lam == 0.0) continue;
                auto& dest = coupling == RegimeCoupling::ImplicitBlock ? op.implicit_part
                                                                       : op.explicit_part;
                dest.emplace_back(row, as.unknown(f, j), lam);
            }
            for (int l = 0; l < d; ++l) {
                if (as.degenerate[f * d + l]) continue;  // dimension's terms vanish at s_l = 0
                const double s_l = as.grid[l][idx[l]];
                const int up = static_cast<int>(f) + as.strides[l];
                const int dn = static_cast<int>(f) - as.strides[l];
                const double adv = model.r[i] * s_l / (2.0 * delta[l]);
                const double dif = 0.5 * model.a[i](l, l) * s_l * s_l / (delta[l] * delta[l]);
                op.implicit_part.emplace_back(row, as.unknown(up, i), adv + dif);
                op.implicit_part.emplace_back(row, as.unknown(dn, i), -adv + dif);
                op.implicit_part.emplace_back(row, row, -2.0 * dif);
                for (int m = l + 1; m < d; ++m) {
                    if (as.degenerate[f * d + m]) continue;
                    const double a_lm = model.a[i](l, m);
                    if (a_lm == 0.0) continue;
                    const double s_m = as.grid[m][idx[m]];
                    const double w = a_lm * s_l * s_m / (4.0 * delta[l] * delta[m]);
                    const int pp = static_cast<int>(f) + as.strides[l] + as.strides[m];
                    const int pm = static_cast<int>(f) + as.strides[l] - as.strides[m];
                    const int mp = static_cast<int>(f) - as.strides[l] + as.strides[m];
                    const int mm = static_cast<int>(f) - as.strides[l] - as.strides[m];
                    op.explicit_part.emplace_back(row, as.unknown(pp, i), w);
                    op.explicit_part.emplace_back(row, as.unknown(pm, i), -w);
                    op.explicit_part.emplace_back(row, as.unknown(mp, i), -w);
                    op.explicit_part.emplace_back(row, as.unknown(mm, i), w);
                }
            }
        }
    }
    return op;
}

SpMat build_matrix(const Assembly& as, const std::vector<Triplet>& lhs_terms, double lhs_coeff,
                   const std::vector<Triplet>& rhs_terms, double rhs_coeff, bool identity_base,
                   bool dirichlet_identity) {
    std::vector<Triplet> trips;
    trips.reserve(lhs_terms.size() + rhs_terms.size() + as.size);
    if (identity_base) {
        for (std::size_t f = 0; f < as.n_space; ++f) {
            if (as.role[f] == NodeRole::Dirichlet) continue;
            for (int i = 0; i < as.k; ++i) trips.emplace_back(as.unknown(f, i), as.unknown(f, i), 1.0);
        }
    }
    if (dirichlet_identity) {
        for (std::size_t f = 0; f < as.n_space; ++f) {
            if (as.role[f] != NodeRole::Dirichlet) continue;
            for (int i = 0; i < as.k; ++i) trips.emplace_back(as.unknown(f, i), as.unknown(f, i), 1.0);
        }
    }
    for (const auto& t : lhs_terms) trips.emplace_back(t.row(), t.col(), lhs_coeff * t.value());
    for (const auto& t : rhs_terms) trips.emplace_back(t.row(), t.col(), rhs_coeff * t.value());
    SpMat m(as.size, as.size);
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

/// Direct factorization for d = 1 (block tridiagonal), BiCGSTAB for d = 2.
struct StepSolver {
    std::unique_ptr<Eigen::SparseLU<SpMat>> lu;
    std::unique_ptr<Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>>> iterative;

    void prepare(const SpMat& a, bool direct) {
        if (direct) {
            lu = std::make_unique<Eigen::SparseLU<SpMat>>();
            lu->compute(a);
            if (lu->info() != Eigen::Success)
                throw LinearSolveFailure("time-step matrix factorization failed");
        } else {
            iterative =
                std::make_unique<Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>>>();
            iterative->setTolerance(1e-12);
            iterative->setMaxIterations(2000);
            iterative->compute(a);
            if (iterative->info() != Eigen::Success)
                throw LinearSolveFailure("time-step preconditioner failed");
        }
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs, int step) const {
        if (lu) {
            Eigen::VectorXd x = lu->solve(rhs);
            if (lu->info() != Eigen::Success)
                throw LinearSolveFailure("direct solve failed at step " + std::to_string(step));
            return x;
        }
        Eigen::VectorXd x = iterative->solveWithGuess(rhs, rhs);
        if (iterative->info() != Eigen::Success)
            throw LinearSolveFailure("iterative solve stalled at step " + std::to_string(step) +
                                     " (error " + std::to_string(iterative->error()) + ")");
        return x;
    }
};

}  // namespace

FdResult solve_ibvp(const RegimeModel& model, const Payoff& payoff, const TruncatedDomain& domain,
                    const BoundaryData& boundary, const FdConfig& config) {
    config.check(model.d);
    const GrowthBounds growth = payoff_growth_bounds(payoff, model.d);
    const Assembly as = classify(model, domain, config);
    const OperatorPair op = assemble_operator(model, as, config.coupling);

    const int steps = config.time_steps;
    const double dt = domain.horizon / steps;
    const bool direct = model.d == 1;

    // theta = 1 (implicit Euler) and theta = 1/2 (Crank-Nicolson); CN starts
    // with two implicit-Euler steps to damp the payoff kink.
    const bool use_cn = config.scheme == FdScheme::CrankNicolson;
    SpMat a_ie = build_matrix(as, op.implicit_part, -dt, {}, 0.0, true, true);
    SpMat b_ie = build_matrix(as, op.explicit_part, dt, {}, 0.0, true, false);
    StepSolver solver_ie;
    solver_ie.prepare(a_ie, direct);

    SpMat a_cn, b_cn;
    StepSolver solver_cn;
    if (use_cn) {
        a_cn = build_matrix(as, op.implicit_part, -0.5 * dt, {}, 0.0, true, true);
        b_cn = build_matrix(as, op.implicit_part, 0.5 * dt, op.explicit_part, dt, true, false);
        solver_cn.prepare(a_cn, direct);
    }

    PriceField field = PriceField::zeros(
        [&] {
            std::vector<double> tg(steps + 1);
            for (int m = 0; m <= steps; ++m) tg[m] = domain.horizon * m / steps;
            return tg;
        }(),
        as.grid, model.k);

    Eigen::VectorXd u(as.size);
    for (std::size_t f = 0; f < as.n_space; ++f) {
        const Vec s = field.node(f);
        const double terminal = evaluate_payoff(payoff, s.cwiseMax(1e-300));
        for (int i = 0; i < model.k; ++i) u[as.unknown(f, i)] = terminal;
    }
    for (std::size_t f = 0; f < as.n_space; ++f)
        for (int i = 0; i < model.k; ++i) field.at(steps, i, f) = u[as.unknown(f, i)];

    const int rannacher = use_cn ? std::min(2, steps) : 0;
    for (int m = steps - 1; m >= 0; --m) {
        const bool startup = (steps - 1 - m) < rannacher;
        const bool cn_step = use_cn && !startup;
        const double t_new = field.t_grid[m];
        Eigen::VectorXd rhs = (cn_step ? b_cn : b_ie) * u;
        for (std::size_t f = 0; f < as.n_space; ++f) {
            if (as.role[f] != NodeRole::Dirichlet) continue;
            const Vec s = field.node(f);
            for (int i = 0; i < model.k; ++i)
                rhs[as.unknown(f, i)] =
                    boundary.value(model, payoff, growth, domain.horizon, t_new, s, i);
        }
        u = (cn_step ? solver_cn : solver_ie).solve(rhs, m);
        for (std::size_t f = 0; f < as.n_space; ++f)
            for (int i = 0; i < model.k; ++i) field.at(m, i, f) = u[as.unknown(f, i)];
    }

    FdResult result;
    result.field = std::move(field);
    result.cfl_warning = config.coupling == RegimeCoupling::ExplicitLagged &&
                         model.max_exit_rate() * dt > 1.0;
    return result;
}

std::vector<double> measured_truncation_error(const RegimeModel& model, const Payoff& payoff,
                                              const TruncatedDomain& domain_small,
                                              const TruncatedDomain& domain_large,
                                              const BoundaryData& boundary,
                                              const FdConfig& config,
                                              const std::vector<ProbePoint>& probes) {
    for (int l = 0; l < model.d; ++l)
        if (domain_large.s_lo[l] > domain_small.s_lo[l] ||
            domain_large.s_hi[l] < domain_small.s_hi[l])
            throw ConfigError("reference domain must contain the truncated domain");
    for (const auto& p : probes) {
        if (!domain_small.contains(p.s) || p.t < 0.0 || p.t > domain_small.horizon)
            throw ProbeOutsideDomain("probe lies outside the truncated domain");
        if (p.regime < 0 || p.regime >= model.k)
            throw ConfigError("probe regime out of range");
    }

    FdConfig config_large = config;
    for (int l = 0; l < model.d; ++l) {
        const double ratio = (domain_large.s_hi[l] - domain_large.s_lo[l]) /
                             (domain_small.s_hi[l] - domain_small.s_lo[l]);
        config_large.space_nodes[l] =
            static_cast<int>(std::lround((config.space_nodes[l] - 1) * ratio)) + 1;
    }

    const FdResult small = solve_ibvp(model, payoff, domain_small, boundary, config);
    const FdResult large = solve_ibvp(model, payoff, domain_large, boundary, config_large);

    std::vector<double> err;
    err.reserve(probes.size());
    for (const auto& p : probes) {
        const double vs = small.field.interpolate(p.t, p.s, p.regime);
        const double vl = large.field.interpolate(p.t, p.s, p.regime);
        err.push_back(std::abs(vs - vl));
    }
    return err;
}

}  // namespace tcert
