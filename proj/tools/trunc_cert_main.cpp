#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <algorithm>
#include <sstream>

#include "tcert/bounds.hpp"
#include "tcert/bsm.hpp"
#include "tcert/csv.hpp"
#include "tcert/fd.hpp"
#include "tcert/ie.hpp"
#include "tcert/mc.hpp"

using nlohmann::json;
using namespace tcert;

namespace {

// exit-code contract: 0 ok, 2 config invalid, 3 I/O, 4 solver/domain error,
// 5 certification violated
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitSolver = 4;
constexpr int kExitCertViolation = 5;

struct Cli {
    std::string config_path;
    std::string method = "ie";
    std::string out_path;
    std::string dump_field_path;
    std::string dump_binary_path;
    bool measure = false;
    bool proof_form = false;
    int threads = 1;
    long seed = -1;  // -1: take the config value (default 0)
};

struct LoadedConfig {
    MarketConfig market;
    json raw;
    std::uint64_t seed = 0;
    std::vector<ProbePoint> probes;
};

LoadedConfig load(const Cli& cli) {
    std::ifstream in(cli.config_path);
    if (!in) throw std::ios_base::failure("cannot open config file '" + cli.config_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    LoadedConfig lc;
    lc.market = load_market_config(ss.str());
    lc.raw = json::parse(ss.str());
    lc.seed = cli.seed >= 0 ? static_cast<std::uint64_t>(cli.seed)
                            : lc.raw.value("seed", std::uint64_t{0});
    if (lc.raw.contains("probes")) {
        for (const auto& jp : lc.raw.at("probes")) {
            ProbePoint p;
            p.t = jp.at("t").get<double>();
            const auto& js = jp.at("s");
            p.s = Vec(js.size());
            for (std::size_t l = 0; l < js.size(); ++l)
                p.s[static_cast<int>(l)] = js[l].get<double>();
            p.regime = jp.value("i", 1) - 1;  // config uses 1-based regimes
            if (p.regime < 0 || p.regime >= lc.market.model.k)
                throw ConfigError("probe regime out of range");
            lc.probes.push_back(std::move(p));
        }
    }
    return lc;
}

void emit(const Cli& cli, const CsvWriter& csv) {
    if (cli.out_path.empty())
        std::cout << csv.str();
    else
        csv.save(cli.out_path);
}

BoundaryData boundary_from_name(const std::string& name) {
    if (name == "payoff-extension") return BoundaryData::payoff_extension();
    if (name == "discounted-linear-envelope") return BoundaryData::discounted_linear_envelope();
    if (name == "zero") return BoundaryData::zero();
    throw ConfigError("unknown boundary kind '" + name + "'");
}

FdConfig fd_config_from(const LoadedConfig& lc) {
    FdConfig cfg;
    const json blk = lc.raw.value("fd", json::object());
    cfg.time_steps = blk.value("time_steps", 200);
    cfg.space_nodes.assign(lc.market.model.d, 201);
    if (blk.contains("space_nodes")) {
        cfg.space_nodes.clear();
        for (const auto& n : blk.at("space_nodes")) cfg.space_nodes.push_back(n.get<int>());
    }
    const std::string scheme = blk.value("scheme", "crank-nicolson");
    if (scheme == "crank-nicolson")
        cfg.scheme = FdScheme::CrankNicolson;
    else if (scheme == "implicit-euler")
        cfg.scheme = FdScheme::ImplicitEuler;
    else
        throw ConfigError("unknown fd scheme '" + scheme + "'");
    const std::string coupling = blk.value("coupling", "implicit-block");
    if (coupling == "implicit-block")
        cfg.coupling = RegimeCoupling::ImplicitBlock;
    else if (coupling == "explicit-lagged")
        cfg.coupling = RegimeCoupling::ExplicitLagged;
    else
        throw ConfigError("unknown fd coupling '" + coupling + "'");
    return cfg;
}

BoundaryData boundary_from(const LoadedConfig& lc) {
    const json blk = lc.raw.value("fd", json::object());
    return boundary_from_name(blk.value("boundary", "discounted-linear-envelope"));
}

IeConfig ie_config_from(const LoadedConfig& lc, int threads) {
    const json blk = lc.raw.value("ie", json::object());
    IeConfig cfg = IeConfig::for_domain(lc.market.model, lc.market.domain,
                                        blk.value("t_count", 41), blk.value("s_count", 129));
    cfg.v_panels = blk.value("v_panels", 24);
    cfg.x_quad_order = blk.value("x_quad_order", 24);
    cfg.eta_quad_order = blk.value("eta_quad_order", 48);
    cfg.tol = blk.value("tol", 1e-7);
    cfg.max_iter = blk.value("max_iter", 80);
    cfg.threads = threads;
    return cfg;
}

FarGridSpec far_grid_from(const LoadedConfig& lc) {
    FarGridSpec g;
    const json blk = lc.raw.value("bounds", json::object());
    g.t_count = blk.value("far_t_count", 64);
    g.s_count = blk.value("far_s_count", 33);
    return g;
}

std::vector<std::string> probe_header(int d) {
    std::vector<std::string> h{"t"};
    for (int l = 1; l <= d; ++l) h.push_back(d == 1 ? "s" : "s" + std::to_string(l));
    h.push_back("i");
    return h;
}

std::vector<std::string> probe_cells(const ProbePoint& p) {
    std::vector<std::string> c{csv_num(p.t)};
    for (int l = 0; l < p.s.size(); ++l) c.push_back(csv_num(p.s[l]));
    c.push_back(std::to_string(p.regime + 1));
    return c;
}

int cmd_validate(const Cli& cli) {
    const LoadedConfig lc = load(cli);
    const auto& m = lc.market.model;
    std::printf("model ok: d=%d k=%d\n", m.d, m.k);
    for (int i = 0; i < m.k; ++i) {
        std::printf("regime %d: r=%.6g exit_rate=%.6g a=[", i + 1, m.r[i], m.exit_rate[i]);
        for (int l = 0; l < m.d; ++l)
            for (int l2 = 0; l2 < m.d; ++l2)
                std::printf("%s%.6g", (l + l2 ? " " : ""), m.a[i](l, l2));
        std::printf("]\n");
    }
    for (int l = 0; l < m.d; ++l)
        std::printf("dim %d: D=%.6g max_a=%.6g\n", l + 1, diffusion_gap(m, l),
                    m.max_diffusion(l));
    return 0;
}

int cmd_price(const Cli& cli) {
    const LoadedConfig lc = load(cli);
    const auto& mk = lc.market;
    if (lc.probes.empty()) throw ConfigError("price command needs a probes list");

    if (cli.method == "mc") {
        const long n_paths = lc.raw.value("mc", json::object()).value("n_paths", 100000L);
        auto header = probe_header(mk.model.d);
        header.insert(header.end(), {"mean", "stderr", "n_paths", "seed"});
        CsvWriter csv(header);
        for (const auto& p : lc.probes) {
            const McEstimate est = price_mc(mk.model, mk.payoff, mk.domain.horizon, p.t, p.s,
                                            p.regime, n_paths, lc.seed, cli.threads);
            auto cells = probe_cells(p);
            cells.insert(cells.end(), {csv_num(est.mean), csv_num(est.std_error),
                                       std::to_string(est.n_paths), std::to_string(est.seed)});
            csv.row(cells);
        }
        emit(cli, csv);
        return 0;
    }

    if (cli.method == "ie") {
        IeEngine engine(mk.model, mk.payoff, mk.domain.horizon, ie_config_from(lc, cli.threads));
        const IeResult result = engine.solve();
        CsvWriter iters({"iter", "v_norm_diff", "wall_time_ms"});
        for (const auto& rec : result.history)
            iters.row({std::to_string(rec.iter), csv_num(rec.v_norm_diff), csv_num(rec.wall_ms)});
        if (!cli.out_path.empty())
            iters.save(cli.out_path + ".iterations.csv");
        else
            std::cerr << iters.str();
        if (!result.converged)
            throw NoConvergence("picard iteration stalled at V-norm " +
                                std::to_string(result.achieved));
        auto header = probe_header(mk.model.d);
        header.push_back("value");
        CsvWriter csv(header);
        for (const auto& p : lc.probes) {
            auto cells = probe_cells(p);
            cells.push_back(csv_num(result.field.interpolate(p.t, p.s, p.regime)));
            csv.row(cells);
        }
        emit(cli, csv);
        return 0;
    }

    if (cli.method == "fd") {
        const FdResult result =
            solve_ibvp(mk.model, mk.payoff, mk.domain, boundary_from(lc), fd_config_from(lc));
        auto header = probe_header(mk.model.d);
        header.push_back("value");
        CsvWriter csv(header);
        for (const auto& p : lc.probes) {
            if (!mk.domain.contains(p.s))
                throw ProbeOutsideDomain("price probe outside the fd domain");
            auto cells = probe_cells(p);
            cells.push_back(csv_num(result.field.interpolate(p.t, p.s, p.regime)));
            csv.row(cells);
        }
        emit(cli, csv);
        if (!cli.dump_field_path.empty()) {
            std::vector<std::string> fh{"t"};
            for (int l = 1; l <= mk.model.d; ++l)
                fh.push_back(mk.model.d == 1 ? "s" : "s" + std::to_string(l));
            fh.insert(fh.end(), {"i", "value"});
            CsvWriter dump(fh);
            const auto& f = result.field;
            for (std::size_t ti = 0; ti < f.t_grid.size(); ++ti)
                for (std::size_t fl = 0; fl < f.n_space(); ++fl) {
                    const Vec s = f.node(fl);
                    for (int i = 0; i < f.regimes; ++i) {
                        std::vector<std::string> cells{csv_num(f.t_grid[ti])};
                        for (int l = 0; l < s.size(); ++l) cells.push_back(csv_num(s[l]));
                        cells.push_back(std::to_string(i + 1));
                        cells.push_back(csv_num(f.at(static_cast<int>(ti), i, fl)));
                        dump.row(cells);
                    }
                }
            dump.save(cli.dump_field_path);
        }
        if (!cli.dump_binary_path.empty()) {
            std::ofstream bin(cli.dump_binary_path, std::ios::binary);
            if (!bin) throw std::ios_base::failure("cannot write binary dump");
            const auto& f = result.field;
            const char magic[4] = {'T', 'C', 'R', 'T'};
            const std::uint32_t version = 1, d32 = static_cast<std::uint32_t>(mk.model.d),
                                k32 = static_cast<std::uint32_t>(f.regimes);
            bin.write(magic, 4);
            bin.write(reinterpret_cast<const char*>(&version), 4);
            bin.write(reinterpret_cast<const char*>(&d32), 4);
            bin.write(reinterpret_cast<const char*>(&k32), 4);
            const std::uint64_t nt = f.t_grid.size();
            bin.write(reinterpret_cast<const char*>(&nt), 8);
            for (const auto& g : f.s_grid) {
                const std::uint64_t n = g.size();
                bin.write(reinterpret_cast<const char*>(&n), 8);
            }
            bin.write(reinterpret_cast<const char*>(f.t_grid.data()), 8 * f.t_grid.size());
            for (const auto& g : f.s_grid)
                bin.write(reinterpret_cast<const char*>(g.data()), 8 * g.size());
            bin.write(reinterpret_cast<const char*>(f.values.data()), 8 * f.values.size());
        }
        return 0;
    }
    throw ConfigError("unknown method '" + cli.method + "'");
}

int cmd_bounds_compare(const Cli& cli) {
    const LoadedConfig lc = load(cli);
    const auto& mk = lc.market;
    if (mk.model.d != 1) throw ProbeOutsideDomain("bounds-compare is a d=1 product");
    const json blk = lc.raw.value("bounds", json::object());
    const int nt = std::max(2, blk.value("t_count", 200));
    const int ns = std::max(2, blk.value("s_count", 200));

    CsvWriter csv({"t", "s", "psi", "psi_bar", "psi_hat", "in_D", "diff"});
    Vec s(1);
    for (int tn = 0; tn < nt; ++tn) {
        const double t = mk.domain.horizon * tn / (nt - 1);
        for (int sn = 0; sn < ns; ++sn) {
            s[0] = mk.domain.s_hi[0] * (sn + 1) / ns;
            const double p = psi(mk.model, 0, t, s[0], mk.domain);
            const double pb = cli.proof_form
                                  ? psi_bar_proof_form(mk.model, 0, t, s[0], mk.domain)
                                  : psi_bar(mk.model, 0, t, s[0], mk.domain);
            const bool in_d = in_domain_D(mk.model, t, s, mk.domain);
            const double ph = psi_hat(mk.model, 0, t, s, mk.domain);
            csv.row({csv_num(t), csv_num(s[0]), csv_num(p), csv_num(pb), csv_num(ph),
                     in_d ? "1" : "0", csv_num(p - pb)});
        }
    }
    emit(cli, csv);
    return 0;
}

int cmd_certify(const Cli& cli) {
    const LoadedConfig lc = load(cli);
    const auto& mk = lc.market;
    if (lc.probes.empty()) throw ConfigError("certify command needs a probes list");
    const BoundaryData boundary = boundary_from(lc);
    const FarGridSpec grid = far_grid_from(lc);

    std::vector<double> measured;
    if (cli.measure) {
        const json blk = lc.raw.value("bounds", json::object());
        const double scale = blk.value("reference_scale", 4.0);
        TruncatedDomain big = mk.domain;
        big.s_hi *= scale;
        measured = measured_truncation_error(mk.model, mk.payoff, mk.domain, big, boundary,
                                             fd_config_from(lc), lc.probes);
    }

    auto header = probe_header(mk.model.d);
    for (int l = 1; l <= mk.model.d; ++l) {
        const std::string suffix = mk.model.d == 1 ? "" : "_" + std::to_string(l);
        header.push_back("psi" + suffix);
        header.push_back("psi_bar" + suffix);
        header.push_back("psi_hat" + suffix);
    }
    header.insert(header.end(), {"in_D", "far_bound", "far_bound_v1", "certified"});
    if (cli.measure) header.push_back("measured");
    CsvWriter csv(header);

    bool violated = false;
    for (std::size_t n = 0; n < lc.probes.size(); ++n) {
        const auto& p = lc.probes[n];
        const BoundReport rep =
            certify_point(mk.model, mk.payoff, boundary, mk.domain, p.t, p.s, p.regime, grid);
        auto cells = probe_cells(p);
        for (int l = 0; l < mk.model.d; ++l) {
            cells.push_back(csv_num(rep.psi[l]));
            cells.push_back(csv_num(rep.psi_bar[l]));
            cells.push_back(csv_num(rep.psi_hat[l]));
        }
        cells.push_back(rep.in_D ? "1" : "0");
        cells.insert(cells.end(),
                     {csv_num(rep.far_bound), csv_num(rep.far_bound_v1), csv_num(rep.certified)});
        if (cli.measure) {
            cells.push_back(csv_num(measured[n]));
            if (measured[n] > rep.certified) violated = true;
        }
        csv.row(cells);
    }
    emit(cli, csv);
    if (violated) {
        std::cerr << "certification violated: measured truncation error exceeds the bound\n";
        return kExitCertViolation;
    }
    return 0;
}

int cmd_size_domain(const Cli& cli) {
    const LoadedConfig lc = load(cli);
    const auto& mk = lc.market;
    if (lc.probes.empty()) throw ConfigError("size-domain command needs a probe");
    const json blk = lc.raw.value("bounds", json::object());
    if (!blk.contains("tolerance"))
        throw ConfigError("size-domain needs bounds.tolerance in the config");
    const double tol = blk.at("tolerance").get<double>();
    const SizingResult res = size_domain(mk.model, mk.payoff, boundary_from(lc), mk.domain,
                                         lc.probes.front(), tol, far_grid_from(lc));
    std::vector<std::string> header{"c"};
    for (int l = 1; l <= mk.model.d; ++l)
        header.push_back(mk.model.d == 1 ? "s_hi" : "s_hi" + std::to_string(l));
    header.push_back("achieved_bound");
    CsvWriter csv(header);
    std::vector<std::string> cells{csv_num(res.scale)};
    for (int l = 0; l < mk.model.d; ++l) cells.push_back(csv_num(res.s_hi[l]));
    cells.push_back(csv_num(res.achieved));
    csv.row(cells);
    emit(cli, csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"regime-switching option pricing with certified domain-truncation error"};
    app.require_subcommand(1);
    Cli cli;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", cli.config_path, "JSON configuration file")->required();
        sub->add_option("--out", cli.out_path, "output CSV path (default stdout)");
        sub->add_option("--threads", cli.threads, "worker cap")->check(CLI::PositiveNumber);
        sub->add_option("--seed", cli.seed, "override the config seed");
        return sub;
    };

    add_common(app.add_subcommand("validate", "check the model and print derived quantities"));
    auto* price = add_common(app.add_subcommand("price", "price at the configured probes"));
    price->add_option("--method", cli.method, "ie | mc | fd")
        ->check(CLI::IsMember({"ie", "mc", "fd"}));
    price->add_option("--dump-field", cli.dump_field_path, "write the full fd field as CSV");
    price->add_option("--dump-binary", cli.dump_binary_path, "write the full fd field (binary)");
    auto* bc =
        add_common(app.add_subcommand("bounds-compare", "tabulate psi, psi_bar, psi_hat on a grid"));
    bc->add_flag("--proof-form", cli.proof_form,
                 "diagnostics: report the pre-simplification max-of-two bound as psi_bar");
    auto* certify = add_common(app.add_subcommand("certify", "certified error at the probes"));
    certify->add_flag("--measure", cli.measure,
                      "also measure the two-domain fd error and check domination");
    add_common(app.add_subcommand("size-domain", "smallest admissible far boundary"));

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("validate")) return cmd_validate(cli);
        if (app.got_subcommand("price")) return cmd_price(cli);
        if (app.got_subcommand("bounds-compare")) return cmd_bounds_compare(cli);
        if (app.got_subcommand("certify")) return cmd_certify(cli);
        if (app.got_subcommand("size-domain")) return cmd_size_domain(cli);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const RowSumViolation& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NegativeOffDiagonal& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const SingularVolatility& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NegativeRate& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const UnboundedPayoff& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const Error& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitSolver;
    }
    return 0;
}
