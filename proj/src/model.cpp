#include "tcert/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tcert/rng.hpp"

namespace tcert {

double RegimeModel::min_rate() const { return *std::min_element(r.begin(), r.end()); }
double RegimeModel::max_rate() const { return *std::max_element(r.begin(), r.end()); }

double RegimeModel::max_diffusion(int l) const {
    double m = a[0](l, l);
    for (int i = 1; i < k; ++i) m = std::max(m, a[i](l, l));
    return m;
}

double RegimeModel::max_exit_rate() const {
    return *std::max_element(exit_rate.begin(), exit_rate.end());
}

RegimeModel validate_model(RegimeModel model) {
    if (model.d < 1) throw ConfigError("asset count d must be >= 1");
    if (model.k < 1) throw ConfigError("regime count k must be >= 1");
    if (static_cast<int>(model.r.size()) != model.k)
        throw ConfigError("rate vector length does not match regime count");
    if (static_cast<int>(model.sigma.size()) != model.k)
        throw ConfigError("sigma list length does not match regime count");
    if (model.lambda.rows() != model.k || model.lambda.cols() != model.k)
        throw ConfigError("generator matrix must be k x k");

    for (int i = 0; i < model.k; ++i) {
        if (model.r[i] < 0.0)
            throw NegativeRate("rate r(" + std::to_string(i + 1) + ") is negative");
        if (model.sigma[i].rows() != model.d || model.sigma[i].cols() != model.d)
            throw ConfigError("sigma(" + std::to_string(i + 1) + ") must be d x d");
    }

    for (int i = 0; i < model.k; ++i) {
        double row_sum = 0.0, row_max = 0.0;
        for (int j = 0; j < model.k; ++j) {
            const double v = model.lambda(i, j);
            row_sum += v;
            row_max = std::max(row_max, std::abs(v));
            if (i != j && v < 0.0)
                throw NegativeOffDiagonal("generator entry (" + std::to_string(i + 1) + "," +
                                          std::to_string(j + 1) + ") is negative");
        }
        if (std::abs(row_sum) > 1e-12 * std::max(1.0, row_max))
            throw RowSumViolation("generator row " + std::to_string(i + 1) + " sums to " +
                                  std::to_string(row_sum) + ", expected 0");
    }

    model.a.assign(model.k, Mat());
    model.chol_a.assign(model.k, Mat());
    model.a_inv.assign(model.k, Mat());
    model.exit_rate.assign(model.k, 0.0);

    for (int i = 0; i < model.k; ++i) {
        // invertibility via singular values; guards the SPD checks below
        Eigen::JacobiSVD<Mat> svd(model.sigma[i]);
        const double smax = svd.singularValues()(0);
        const double smin = svd.singularValues()(model.d - 1);
        if (smin <= 0.0 || smax / smin > 1e12)
            throw SingularVolatility("sigma(" + std::to_string(i + 1) +
                                     ") is singular or near-singular");

        Mat a = model.sigma[i] * model.sigma[i].transpose();
        a = 0.5 * (a + a.transpose());  // enforce exact symmetry
        Eigen::LLT<Mat> llt(a);
        if (llt.info() != Eigen::Success)
            throw SingularVolatility("diffusion matrix a(" + std::to_string(i + 1) +
                                     ") is not positive definite");
        model.a[i] = a;
        model.chol_a[i] = llt.matrixL();
        model.a_inv[i] = llt.solve(Mat::Identity(model.d, model.d));
        model.exit_rate[i] = std::abs(model.lambda(i, i));
    }
    model.validated = true;
    return model;
}

// ---------------------------------------------------------------------------
// payoff

Payoff Payoff::vanilla_call(double strike) {
    Payoff p;
    p.kind = PayoffKind::VanillaCall;
    p.weights = Vec::Ones(1);
    p.strike = strike;
    return p;
}

Payoff Payoff::vanilla_put(double strike) {
    Payoff p = vanilla_call(strike);
    p.kind = PayoffKind::VanillaPut;
    return p;
}

Payoff Payoff::basket_call(Vec weights, double strike) {
    Payoff p;
    p.kind = PayoffKind::BasketCall;
    p.weights = std::move(weights);
    p.strike = strike;
    return p;
}

Payoff Payoff::basket_put(Vec weights, double strike) {
    Payoff p = basket_call(std::move(weights), strike);
    p.kind = PayoffKind::BasketPut;
    return p;
}

static double table_value(const std::vector<std::pair<double, double>>& table, double u) {
    if (table.empty()) throw UnboundedPayoff("custom payoff table is empty");
    if (u <= table.front().first) return table.front().second;
    if (u >= table.back().first) {
        // constant extrapolation keeps the table Lipschitz with slope 0 outside
        return table.back().second;
    }
    auto hi = std::upper_bound(table.begin(), table.end(), u,
                               [](double x, const auto& kv) { return x < kv.first; });
    auto lo = hi - 1;
    const double w = (u - lo->first) / (hi->first - lo->first);
    return lo->second + w * (hi->second - lo->second);
}

double evaluate_payoff(const Payoff& payoff, const Vec& s) {
    for (int l = 0; l < s.size(); ++l)
        if (s[l] <= 0.0)
            throw NonPositivePrice("price coordinate " + std::to_string(l + 1) +
                                   " must be positive");
    const double basket = payoff.weights.size() > 0 ? payoff.weights.dot(s) : s.sum();
    switch (payoff.kind) {
        case PayoffKind::BasketCall:
        case PayoffKind::VanillaCall:
            return std::max(basket - payoff.strike, 0.0);
        case PayoffKind::BasketPut:
        case PayoffKind::VanillaPut:
            return std::max(payoff.strike - basket, 0.0);
        case PayoffKind::CustomTable:
            return table_value(payoff.table, basket);
    }
    return 0.0;
}

GrowthBounds payoff_growth_bounds(const Payoff& payoff, int d) {
    GrowthBounds g;
    const Vec w = payoff.weights.size() > 0 ? payoff.weights : Vec::Ones(d);
    switch (payoff.kind) {
        case PayoffKind::BasketCall:
        case PayoffKind::VanillaCall:
            g.k1 = 0.0;
            g.k2 = w;
            g.k3 = payoff.strike;
            g.k4 = w;
            return g;
        case PayoffKind::BasketPut:
        case PayoffKind::VanillaPut:
            g.k1 = payoff.strike;
            g.k2 = Vec::Zero(d);
            g.k3 = 0.0;
            g.k4 = -w;
            return g;
        case PayoffKind::CustomTable:
            break;
    }
    if (!payoff.declared_growth)
        throw UnboundedPayoff("custom payoff table requires declared growth bounds");
    // verify the declared envelope by sampling rather than trusting it
    g = *payoff.declared_growth;
    if (g.k1 < 0.0 || g.k3 < 0.0)
        throw UnboundedPayoff("declared growth bounds need k1 >= 0 and k3 >= 0");
    double scale = payoff.table.empty() ? 1.0 : std::max(1.0, payoff.table.back().first);
    rng::Xoshiro256pp gen(0x5eedULL);
    Vec s(d);
    for (int n = 0; n < 2000; ++n) {
        for (int l = 0; l < d; ++l) s[l] = gen.next_double() * 10.0 * scale + 1e-9;
        const double v = evaluate_payoff(payoff, s);
        const double upper = g.k1 + g.k2.dot(s);
        const double lower = -g.k3 + g.k4.dot(s);
        if (v > upper + 1e-9 * (1.0 + std::abs(upper)) ||
            v < lower - 1e-9 * (1.0 + std::abs(lower)))
            throw UnboundedPayoff("declared growth bounds fail at a sampled point");
    }
    return g;
}

// ---------------------------------------------------------------------------
// domain

bool TruncatedDomain::contains(const Vec& s) const {
    for (int l = 0; l < s.size(); ++l)
        if (s[l] < s_lo[l] || s[l] > s_hi[l]) return false;
    return true;
}

bool TruncatedDomain::strictly_inside(const Vec& s) const {
    for (int l = 0; l < s.size(); ++l)
        if (s[l] <= s_lo[l] || s[l] >= s_hi[l]) return false;
    return true;
}

// ---------------------------------------------------------------------------
// price field

std::size_t PriceField::n_space() const {
    std::size_t n = 1;
    for (const auto& g : s_grid) n *= g.size();
    return n;
}

std::size_t PriceField::flat_index(const std::vector<int>& idx) const {
    std::size_t flat = 0;
    for (std::size_t l = 0; l < s_grid.size(); ++l)
        flat = flat * s_grid[l].size() + static_cast<std::size_t>(idx[l]);
    return flat;
}

double& PriceField::at(int ti, int regime, std::size_t flat) {
    return values[(static_cast<std::size_t>(ti) * regimes + regime) * n_space() + flat];
}

double PriceField::at(int ti, int regime, std::size_t flat) const {
    return values[(static_cast<std::size_t>(ti) * regimes + regime) * n_space() + flat];
}

Vec PriceField::node(std::size_t flat) const {
    const int d = static_cast<int>(s_grid.size());
    Vec s(d);
    for (int l = d - 1; l >= 0; --l) {
        const std::size_t n = s_grid[l].size();
        s[l] = s_grid[l][flat % n];
        flat /= n;
    }
    return s;
}

PriceField PriceField::zeros(std::vector<double> t_grid, std::vector<std::vector<double>> s_grid,
                             int regimes) {
    PriceField f;
    f.t_grid = std::move(t_grid);
    f.s_grid = std::move(s_grid);
    f.regimes = regimes;
    f.values.assign(f.t_grid.size() * f.n_space() * regimes, 0.0);
    return f;
}

bool PriceField::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {

/// Cell index and barycentric weight along one axis. Interpolation is linear
/// in ln(coordinate); a cell whose left knot is zero uses linear-in-s there.
/// Out-of-range queries clamp to the end cell and extrapolate.
struct AxisPos {
    int cell;
    double w;
    bool outside;
};

AxisPos locate(const std::vector<double>& grid, double x) {
    const int n = static_cast<int>(grid.size());
    AxisPos p{0, 0.0, false};
    if (n == 1) return p;
    int cell;
    if (x <= grid.front()) {
        cell = 0;
        p.outside = x < grid.front();
    } else if (x >= grid.back()) {
        cell = n - 2;
        p.outside = x > grid.back();
    } else {
        cell = static_cast<int>(std::upper_bound(grid.begin(), grid.end(), x) - grid.begin()) - 1;
    }
    const double a = grid[cell], b = grid[cell + 1];
    if (a > 0.0 && x > 0.0)
        p.w = (std::log(x) - std::log(a)) / (std::log(b) - std::log(a));
    else
        p.w = (x - a) / (b - a);
    p.cell = cell;
    return p;
}

}  // namespace

double PriceField::interpolate(double t, const Vec& x, int regime,
                               std::atomic<long>* out_of_range) const {
    const int d = static_cast<int>(s_grid.size());
    AxisPos pos[3];
    bool outside = false;
    for (int l = 0; l < d; ++l) {
        pos[l] = locate(s_grid[l], x[l]);
        outside = outside || pos[l].outside;
    }
    // time cell (linear in t)
    int tc = 0;
    double tw = 0.0;
    const int nt = static_cast<int>(t_grid.size());
    if (nt > 1) {
        if (t <= t_grid.front())
            tc = 0;
        else if (t >= t_grid.back())
            tc = nt - 2;
        else
            tc = static_cast<int>(std::upper_bound(t_grid.begin(), t_grid.end(), t) -
                                  t_grid.begin()) -
                 1;
        tw = (t - t_grid[tc]) / (t_grid[tc + 1] - t_grid[tc]);
        tw = std::clamp(tw, 0.0, 1.0);
    }
    if (outside && out_of_range) out_of_range->fetch_add(1, std::memory_order_relaxed);

    double acc = 0.0;
    const int corners = 1 << d;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        std::vector<int> idx(d);
        for (int l = 0; l < d; ++l) {
            const bool hi = (c >> l) & 1;
            idx[l] = pos[l].cell + (hi ? 1 : 0);
            w *= hi ? pos[l].w : (1.0 - pos[l].w);
        }
        if (w == 0.0) continue;
        const std::size_t flat = flat_index(idx);
        const double v0 = at(tc, regime, flat);
        const double v = (nt > 1) ? (1.0 - tw) * v0 + tw * at(tc + 1, regime, flat) : v0;
        acc += w * v;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// configuration

using nlohmann::json;

static Vec to_vec(const json& j, const char* what) {
    if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
    Vec v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
    return v;
}

static PayoffKind parse_kind(const std::string& kind) {
    if (kind == "basket-call") return PayoffKind::BasketCall;
    if (kind == "basket-put") return PayoffKind::BasketPut;
    if (kind == "vanilla-call") return PayoffKind::VanillaCall;
    if (kind == "vanilla-put") return PayoffKind::VanillaPut;
    if (kind == "custom-table") return PayoffKind::CustomTable;
    throw ConfigError("unknown payoff kind '" + kind + "'");
}

MarketConfig load_market_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse failure: ") + e.what());
    }
    try {
        MarketConfig cfg;
        RegimeModel m;
        m.d = j.at("d").get<int>();
        m.k = j.at("k").get<int>();
        for (const auto& x : j.at("r")) m.r.push_back(x.get<double>());
        for (const auto& mat : j.at("sigma")) {
            Mat s(m.d, m.d);
            for (int row = 0; row < m.d; ++row)
                for (int col = 0; col < m.d; ++col) s(row, col) = mat.at(row).at(col).get<double>();
            m.sigma.push_back(s);
        }
        m.lambda = Mat(m.k, m.k);
        for (int row = 0; row < m.k; ++row)
            for (int col = 0; col < m.k; ++col)
                m.lambda(row, col) = j.at("lambda").at(row).at(col).get<double>();
        cfg.model = validate_model(std::move(m));

        const auto& jp = j.at("payoff");
        cfg.payoff.kind = parse_kind(jp.at("kind").get<std::string>());
        if (jp.contains("weights"))
            cfg.payoff.weights = to_vec(jp.at("weights"), "payoff.weights");
        else
            cfg.payoff.weights = Vec::Ones(cfg.model.d);
        cfg.payoff.strike = jp.value("strike", 0.0);
        if (jp.contains("table")) {
            for (const auto& kv : jp.at("table")) {
                const double value = kv.at(1).get<double>();
                if (value < 0.0) throw ConfigError("payoff table values must be nonnegative");
                cfg.payoff.table.emplace_back(kv.at(0).get<double>(), value);
            }
        }
        if (jp.contains("growth")) {
            GrowthBounds g;
            g.k1 = jp.at("growth").at("k1").get<double>();
            g.k2 = to_vec(jp.at("growth").at("k2"), "growth.k2");
            g.k3 = jp.at("growth").at("k3").get<double>();
            g.k4 = to_vec(jp.at("growth").at("k4"), "growth.k4");
            cfg.payoff.declared_growth = g;
        }

        const auto& jd = j.at("domain");
        cfg.domain.s_lo = to_vec(jd.at("s_lo"), "domain.s_lo");
        cfg.domain.s_hi = to_vec(jd.at("s_hi"), "domain.s_hi");
        cfg.domain.horizon = jd.at("T").get<double>();
        if (cfg.domain.s_lo.size() != cfg.model.d || cfg.domain.s_hi.size() != cfg.model.d)
            throw ConfigError("domain bounds must have d entries");
        for (int l = 0; l < cfg.model.d; ++l) {
            if (cfg.domain.s_lo[l] < 0.0) throw ConfigError("domain s_lo must be >= 0");
            if (cfg.domain.s_lo[l] >= cfg.domain.s_hi[l])
                throw ConfigError("domain needs s_lo < s_hi in every dimension");
        }
        if (cfg.domain.horizon <= 0.0) throw ConfigError("horizon T must be positive");
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config schema error: ") + e.what());
    }
}

MarketConfig load_market_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_market_config(ss.str());
}

}  // namespace tcert
