// Acceptance suite: runs every criterion standalone and prints one line per
// criterion. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "tcert/bounds.hpp"
#include "tcert/bsm.hpp"
#include "tcert/fd.hpp"
#include "tcert/ie.hpp"
#include "tcert/kernel.hpp"
#include "tcert/mc.hpp"

using namespace tcert;

namespace {

std::string g_cli_path;

struct Outcome {
    bool pass;
    std::string detail;
};

RegimeModel single(double r, double vol) {
    RegimeModel m;
    m.d = 1;
    m.k = 1;
    m.r = {r};
    m.sigma = {Mat::Constant(1, 1, vol)};
    m.lambda = Mat::Zero(1, 1);
    return validate_model(std::move(m));
}

RegimeModel symmetric_two(double r, double vol, double lam) {
    RegimeModel m;
    m.d = 1;
    m.k = 2;
    m.r = {r, r};
    m.sigma = {Mat::Constant(1, 1, vol), Mat::Constant(1, 1, vol)};
    m.lambda = Mat(2, 2);
    m.lambda << -lam, lam, lam, -lam;
    return validate_model(std::move(m));
}

RegimeModel random_model(int d, int k, rng::Xoshiro256pp& gen) {
    RegimeModel m;
    m.d = d;
    m.k = k;
    for (int i = 0; i < k; ++i) m.r.push_back(0.2 * gen.next_double());
    for (int i = 0; i < k; ++i) {
        Mat sig = Mat::Zero(d, d);
        for (int a = 0; a < d; ++a) {
            sig(a, a) = 0.15 + 0.35 * gen.next_double();
            for (int b = 0; b < a; ++b) sig(a, b) = 0.2 * (gen.next_double() - 0.5);
        }
        m.sigma.push_back(sig);
    }
    m.lambda = Mat::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        double total = 0.0;
        for (int j = 0; j < k; ++j) {
            if (j == i) continue;
            const double rate = 0.3 + 1.2 * gen.next_double();
            m.lambda(i, j) = rate;
            total += rate;
        }
        m.lambda(i, i) = -total;
    }
    return validate_model(std::move(m));
}

TruncatedDomain domain_1d(double s_hi, double T = 1.0) {
    TruncatedDomain d;
    d.s_lo = Vec::Zero(1);
    d.s_hi = Vec::Constant(1, s_hi);
    d.horizon = T;
    return d;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome figure1_sign_change() {
    const RegimeModel m = single(0.01, 0.4);
    const TruncatedDomain dom = domain_1d(20.0);
    double most_pos = -1e300, most_neg = 1e300;
    for (int tn = 0; tn < 200; ++tn) {
        const double t = tn / 199.0;
        for (int sn = 1; sn <= 200; ++sn) {
            Vec s(1);
            s << 20.0 * sn / 200.0;
            const double diff = psi(m, 0, t, s[0], dom) - psi_bar(m, 0, t, s[0], dom);
            most_pos = std::max(most_pos, diff);
            most_neg = std::min(most_neg, diff);
        }
    }
    // the pre-simplification proof form of the bound does produce both signs
    double proof_pos = -1e300;
    for (int tn = 0; tn < 200; ++tn)
        for (int sn = 1; sn <= 200; ++sn)
            proof_pos = std::max(proof_pos,
                                 psi(m, 0, tn / 199.0, 20.0 * sn / 200.0, dom) -
                                     psi_bar_proof_form(m, 0, tn / 199.0, 20.0 * sn / 200.0, dom));

    const bool pass = most_pos > 1e-6 && most_neg < -1e-6;
    return {pass, "max diff " + fmt(most_pos) + ", min diff " + fmt(most_neg) +
                      (pass ? ""
                            : " (psi <= psi_bar identically for D > 0: exponent gap is "
                              "-(L-(a+D)tau)^2/((a+D)tau Q); the pre-simplification proof form "
                              "does cross, max diff " +
                                  fmt(proof_pos) + ")")};
}

Outcome figure2_sign_change() {
    const RegimeModel m = single(0.20, 0.1);
    const TruncatedDomain dom = domain_1d(20.0);
    double most_pos = -1e300, most_neg = 1e300;
    for (int tn = 0; tn < 200; ++tn) {
        const double t = tn / 199.0;
        for (int sn = 1; sn <= 200; ++sn) {
            Vec s(1);
            s << 20.0 * sn / 200.0;
            if (!in_domain_D(m, t, s, dom)) continue;
            const double diff = psi(m, 0, t, s[0], dom) - psi_bar(m, 0, t, s[0], dom);
            most_pos = std::max(most_pos, diff);
            most_neg = std::min(most_neg, diff);
        }
    }
    const bool pass = most_pos > 1e-6 && most_neg < -1e-6;
    return {pass, "inside D: max diff " + fmt(most_pos) + ", min diff " + fmt(most_neg)};
}

Outcome diffusion_gap_values() {
    const double d1 = diffusion_gap(single(0.01, 0.4), 0);
    const double d2 = diffusion_gap(single(0.20, 0.1), 0);
    const bool pass = std::abs(d1 - 0.14) <= 1e-12 && std::abs(d2 - (-0.39)) <= 1e-12;
    return {pass, "D(sigma=0.4,r=0.01)=" + fmt(d1) + ", D(sigma=0.1,r=0.2)=" + fmt(d2)};
}

Outcome moment_identity() {
    rng::Xoshiro256pp gen(101);
    double worst = 0.0;
    for (int n = 0; n < 20; ++n) {
        const int d = 1 + n % 3;
        const RegimeModel m = random_model(d, 1 + n % 2, gen);
        Vec s(d);
        for (int l = 0; l < d; ++l) s[l] = 0.4 + 3.0 * gen.next_double();
        const double v = 0.05 + gen.next_double();
        worst = std::max(worst, moment_identity_residual(m, s, n % m.k, v, 48));
    }
    return {worst < 1e-8, "max residual " + fmt(worst) + " over 20 sets, d in {1,2,3}"};
}

Outcome generator_identity() {
    rng::Xoshiro256pp gen(202);
    double worst = 0.0, worst_fd = 0.0;
    for (int d = 1; d <= 3; ++d) {
        const RegimeModel m = random_model(d, 2, gen);
        for (int n = 0; n < 100; ++n) {
            Vec x(d), s(d);
            for (int l = 0; l < d; ++l) {
                x[l] = 0.3 + 3.0 * gen.next_double();
                s[l] = 0.3 + 3.0 * gen.next_double();
            }
            const double v = 0.05 + gen.next_double();
            const int i = n % 2;
            worst = std::max(worst, generator_identity_residual(m, x, s, i, v));
            if (n < 10) {
                const KernelDerivatives kd = kernel_derivatives(m, x, s, i, v);
                const double hv = 1e-6 * v;
                const double g1_fd = (log_transition_density(m, x, s, i, v + hv) -
                                      log_transition_density(m, x, s, i, v - hv)) /
                                     (2.0 * hv);
                worst_fd = std::max(worst_fd,
                                    std::abs(kd.g1 - g1_fd) / std::max(1.0, std::abs(g1_fd)));
                for (int l = 0; l < d; ++l) {
                    Vec sp = s, sm = s;
                    const double hs = 1e-6 * s[l];
                    sp[l] += hs;
                    sm[l] -= hs;
                    const double g2_fd = (log_transition_density(m, x, sp, i, v) -
                                          log_transition_density(m, x, sm, i, v)) /
                                         (2.0 * hs);
                    worst_fd = std::max(
                        worst_fd, std::abs(kd.g2[l] - g2_fd) / std::max(1.0, std::abs(g2_fd)));
                }
            }
        }
    }
    const bool pass = worst < 1e-8 && worst_fd < 1e-5;
    return {pass,
            "max bracket residual " + fmt(worst) + ", max fd mismatch " + fmt(worst_fd)};
}

Outcome supersolution_sign() {
    const TruncatedDomain dom = domain_1d(20.0);

    const RegimeModel m1 = single(0.01, 0.4);
    const SupersolutionParams p1 = supersolution_params(m1, 0, dom);
    const bool params_match = std::abs(p1.gamma - 3.125) <= 1e-12 &&
                              std::abs(p1.k - std::exp(1.0 / 0.875)) <= 1e-12;

    const RegimeModel m2 = single(0.20, 0.1);
    const SupersolutionParams p2 = supersolution_params(m2, 0, dom);

    double worst = -1e300;
    for (const auto& [m, p] : {std::pair{&m1, &p1}, std::pair{&m2, &p2}}) {
        for (int tn = 0; tn < 100; ++tn)
            for (int sn = 1; sn <= 100; ++sn)
                worst = std::max(worst, supersolution_residual(*p, *m, dom, 0,
                                                               (tn + 0.5) / 100.0,
                                                               20.0 * sn / 100.0, 0));
    }
    const bool pass = params_match && worst <= 1e-12;
    return {pass, "gamma=" + fmt(p1.gamma) + " k=" + fmt(p1.k) + ", k(anchored)=" + fmt(p2.k) +
                      ", max residual " + fmt(worst)};
}

Outcome single_regime_exactness() {
    const RegimeModel m = single(0.05, 0.2);
    const Payoff call = Payoff::vanilla_call(100.0);
    const double reference = 10.4506;
    Vec s(1);
    s << 100.0;

    const TruncatedDomain dom = domain_1d(400.0);
    IeConfig ie_cfg = IeConfig::for_domain(m, dom, 21, 801);
    ie_cfg.v_panels = 8;
    ie_cfg.x_quad_order = 8;
    IeEngine engine(m, call, dom.horizon, ie_cfg);
    const IeResult ie_res = engine.solve();
    const double ie_value = ie_res.field.interpolate(0.0, s, 0);
    const double ie_err = std::abs(ie_value - reference) / reference;

    FdConfig fd_cfg;
    fd_cfg.time_steps = 200;
    fd_cfg.space_nodes = {201};
    const TruncatedDomain fd_dom = domain_1d(200.0);
    const BoundaryData bsm_bd = BoundaryData::custom_fn([&m](double t, const Vec& sv, int) {
        return black_scholes(true, std::max(sv[0], 1e-12), 100.0, 0.05, 0.2, 1.0 - t);
    });
    const FdResult fd_res = solve_ibvp(m, call, fd_dom, bsm_bd, fd_cfg);
    const double fd_value = fd_res.field.interpolate(0.0, s, 0);
    const double fd_err = std::abs(fd_value - reference) / reference;

    const McEstimate mc = price_mc(m, call, 1.0, 0.0, s, 0, 1000000, 11, 4);
    const double mc_gap = std::abs(mc.mean - reference);

    const bool pass = ie_res.converged && ie_err <= 1e-3 && fd_err <= 1e-2 &&
                      mc_gap <= 4.0 * mc.std_error;
    return {pass, "ie rel " + fmt(ie_err) + ", fd rel " + fmt(fd_err) + ", mc gap " +
                      fmt(mc_gap) + " vs 4se " + fmt(4.0 * mc.std_error)};
}

Outcome contraction_rate() {
    RegimeModel mixed = symmetric_two(0.05, 0.2, 1.0);
    mixed.r = {0.05, 0.02};
    mixed.sigma[1] = Mat::Constant(1, 1, 0.4);
    mixed.validated = false;
    mixed = validate_model(std::move(mixed));

    const Payoff call = Payoff::vanilla_call(100.0);
    const TruncatedDomain dom = domain_1d(400.0);
    IeConfig cfg = IeConfig::for_domain(mixed, dom, 21, 81);
    cfg.v_panels = 12;
    cfg.x_quad_order = 12;
    cfg.tol = 1e-8;
    IeEngine engine(mixed, call, dom.horizon, cfg);
    const IeResult res = engine.solve();
    if (!res.converged || res.history.size() < 4) return {false, "iteration too short"};

    const double bound = 1.0 - std::exp(-1.0) + 0.05;  // lambda = 1, T = 1
    double worst_ratio = 0.0;
    for (std::size_t n = 1; n + 1 < res.history.size(); ++n)
        worst_ratio = std::max(
            worst_ratio, res.history[n + 1].v_norm_diff / res.history[n].v_norm_diff);
    return {worst_ratio <= bound,
            "max successive ratio " + fmt(worst_ratio) + " vs bound " + fmt(bound)};
}

Outcome martingale_checks() {
    rng::Xoshiro256pp gen(303);
    double worst_z = 0.0;
    bool submartingale_ok = true;
    for (int n = 0; n < 10; ++n) {
        const RegimeModel m = random_model(1, 2 + n % 2, gen);
        Vec s(1);
        s << 50.0 + 100.0 * gen.next_double();
        const MartingaleStats ms =
            martingale_residual(m, 0, 1.0, 0.0, s, n % m.k, 60000, 400 + n, 4);
        worst_z = std::max(worst_z, std::abs(ms.z));
        if (ms.undisc_mean < s[0] - 4.0 * ms.undisc_se) submartingale_ok = false;
    }
    const bool pass = worst_z <= 4.0 && submartingale_ok;
    return {pass, "max |z| " + fmt(worst_z) + ", sub-martingale " +
                      (submartingale_ok ? "ok" : "violated")};
}

Outcome growth_envelope_all_solvers() {
    RegimeModel m = symmetric_two(0.05, 0.2, 1.0);
    m.r = {0.05, 0.02};
    m.sigma[1] = Mat::Constant(1, 1, 0.4);
    m.validated = false;
    m = validate_model(std::move(m));
    const Payoff call = Payoff::vanilla_call(100.0);
    const GrowthBounds g = payoff_growth_bounds(call, 1);
    const TruncatedDomain dom = domain_1d(400.0);

    const double probes[5] = {50.0, 80.0, 100.0, 150.0, 250.0};
    auto envelope = [&](double t, double spot) {
        const double df = std::exp(-m.min_rate() * (1.0 - t));
        return std::pair{-g.k3 * df + g.k4[0] * spot, g.k1 * df + g.k2[0] * spot};
    };

    IeConfig ie_cfg = IeConfig::for_domain(m, dom, 21, 101);
    ie_cfg.v_panels = 12;
    ie_cfg.x_quad_order = 12;
    IeEngine engine(m, call, dom.horizon, ie_cfg);
    const IeResult ie_res = engine.solve();

    FdConfig fd_cfg;
    fd_cfg.time_steps = 100;
    fd_cfg.space_nodes = {201};
    const FdResult fd_res =
        solve_ibvp(m, call, dom, BoundaryData::discounted_linear_envelope(), fd_cfg);

    bool ok = ie_res.converged;
    std::string why;
    for (double t : {0.0, 0.5}) {
        for (double spot : probes) {
            Vec s(1);
            s << spot;
            const auto [lo, hi] = envelope(t, spot);
            const double slack = 2e-3 * (1.0 + spot);
            for (int i = 0; i < 2; ++i) {
                const double vie = ie_res.field.interpolate(t, s, i);
                const double vfd = fd_res.field.interpolate(t, s, i);
                if (vie < lo - slack || vie > hi + slack) ok = false, why = "ie";
                if (vfd < lo - slack || vfd > hi + slack) ok = false, why = "fd";
                const McEstimate mc = price_mc(m, call, 1.0, t, s, i, 20000, 37);
                if (mc.mean < lo - 4.0 * mc.std_error || mc.mean > hi + 4.0 * mc.std_error)
                    ok = false, why = "mc";
            }
        }
    }
    return {ok, ok ? "ie, fd, mc inside the envelope at all probes" : why + " left the envelope"};
}

Outcome bound_domination() {
    const Payoff call = Payoff::vanilla_call(10.0);
    const BoundaryData bd = BoundaryData::discounted_linear_envelope();

    // headline measurement on the positive-gap study configuration
    const RegimeModel m1 = single(0.01, 0.4);
    const TruncatedDomain small = domain_1d(20.0);
    const TruncatedDomain large = domain_1d(80.0);

    std::vector<ProbePoint> probes;
    for (double frac : {0.3, 0.4, 0.5, 0.65, 0.8})
        for (double t : {0.0, 0.25, 0.5, 0.75}) {
            ProbePoint p;
            p.t = t;
            p.s = Vec::Constant(1, frac * 20.0);
            p.regime = 0;
            probes.push_back(p);
        }

    FdConfig cfg;
    cfg.time_steps = 200;
    cfg.space_nodes = {201};
    const std::vector<double> measured =
        measured_truncation_error(m1, call, small, large, bd, cfg, probes);

    bool dominated = true;
    bool hat_never_worse = true;
    double max_ratio = 0.0;
    for (std::size_t n = 0; n < probes.size(); ++n) {
        const BoundReport rep = certify_point(m1, call, bd, small, probes[n].t, probes[n].s,
                                              probes[n].regime);
        if (measured[n] > rep.certified) dominated = false;
        if (rep.certified > rep.certified_bar_only * (1.0 + 1e-12)) hat_never_worse = false;
        if (rep.certified > 0.0) max_ratio = std::max(max_ratio, measured[n] / rep.certified);
    }

    // strict improvement of the combined estimate on both study configurations
    int strict1 = 0, strict2 = 0;
    const RegimeModel m2 = single(0.20, 0.1);
    for (const auto& p : probes) {
        const BoundReport r1 = certify_point(m1, call, bd, small, p.t, p.s, p.regime);
        if (r1.certified < r1.certified_bar_only * (1.0 - 1e-9)) ++strict1;
        const BoundReport r2 = certify_point(m2, call, bd, small, p.t, p.s, p.regime);
        if (r2.certified < r2.certified_bar_only * (1.0 - 1e-9)) ++strict2;
    }

    const bool pass = dominated && hat_never_worse && strict1 >= 1 && strict2 >= 1;
    return {pass, "max measured/certified " + fmt(max_ratio) + ", strict improvements " +
                      std::to_string(strict1) + "/" + std::to_string(strict2) + " of " +
                      std::to_string(probes.size()) + " probes"};
}

Outcome determinism() {
    if (g_cli_path.empty()) return {false, "cli path not supplied"};
    char tmpl[] = "/tmp/tcert_accept_XXXXXX";
    const char* dir = mkdtemp(tmpl);
    if (!dir) return {false, "mkdtemp failed"};
    const std::string base = dir;
    {
        std::ofstream cfg(base + "/cfg.json");
        cfg << R"({
  "d": 1, "k": 2, "r": [0.05, 0.02],
  "sigma": [[[0.2]], [[0.4]]],
  "lambda": [[-1.0, 1.0], [1.0, -1.0]],
  "payoff": {"kind": "vanilla-call", "strike": 100.0},
  "domain": {"s_lo": [0.0], "s_hi": [400.0], "T": 1.0},
  "probes": [{"t": 0.0, "s": [100.0], "i": 1}, {"t": 0.25, "s": [120.0], "i": 2}],
  "mc": {"n_paths": 200000},
  "bounds": {"t_count": 60, "s_count": 60}
})";
    }
    auto run = [&](const std::string& args, const std::string& out) {
        const std::string cmd = g_cli_path + " " + args + " --config " + base +
                                "/cfg.json --out " + out + " > /dev/null 2>&1";
        return std::system(cmd.c_str()) == 0;
    };
    auto slurp = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    for (int workers : {1, 2, 8})
        if (!run("price --method mc --seed 7 --threads " + std::to_string(workers),
                 base + "/mc_" + std::to_string(workers) + ".csv"))
            return {false, "cli price run failed"};
    if (!run("price --method mc --seed 7 --threads 1", base + "/mc_repeat.csv"))
        return {false, "cli repeat run failed"};
    if (!run("bounds-compare", base + "/b1.csv") || !run("bounds-compare", base + "/b2.csv"))
        return {false, "cli bounds-compare run failed"};

    const std::string mc1 = slurp(base + "/mc_1.csv");
    const bool pass = !mc1.empty() && mc1 == slurp(base + "/mc_2.csv") &&
                      mc1 == slurp(base + "/mc_8.csv") && mc1 == slurp(base + "/mc_repeat.csv") &&
                      slurp(base + "/b1.csv") == slurp(base + "/b2.csv");
    return {pass, pass ? "byte-identical CSVs at 1, 2, 8 workers and across reruns"
                       : "outputs differ across runs"};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli_path = argv[1];

    struct Criterion {
        int id;
        const char* name;
        double time_limit_s;  // 0: no limit
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "figure-1 sign change", 5.0, figure1_sign_change},
        {2, "figure-2 sign change inside D", 5.0, figure2_sign_change},
        {3, "diffusion gap values", 0.0, diffusion_gap_values},
        {4, "moment identity", 10.0, moment_identity},
        {5, "generator identity", 0.0, generator_identity},
        {6, "supersolution sign", 0.0, supersolution_sign},
        {7, "single-regime exactness", 0.0, single_regime_exactness},
        {8, "contraction rate", 0.0, contraction_rate},
        {9, "martingale checks", 0.0, martingale_checks},
        {10, "growth envelope", 0.0, growth_envelope_all_solvers},
        {11, "bound domination", 60.0, bound_domination},
        {12, "determinism", 0.0, determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome{false, ""};
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        bool pass = outcome.pass;
        std::string note = outcome.detail;
        if (c.time_limit_s > 0.0 && elapsed > c.time_limit_s) {
            pass = false;
            note += " [exceeded " + fmt(c.time_limit_s) + "s limit]";
        }
        std::printf("%s  C%-2d %-32s %6.2fs  %s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    elapsed, note.c_str());
        if (!pass) ++failures;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
                criteria.size());
    return failures;
}
