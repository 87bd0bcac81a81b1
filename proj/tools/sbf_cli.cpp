#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sbf/json_io.hpp"
#include "sbf/sbf.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace sbf;

namespace {

constexpr int kOk = 0, kUsage = 1, kNoConvergence = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config, out = ".", input, input_format = "auto", scenario;
    std::size_t workers = 0;
    std::uint64_t seed = 1;
    std::size_t n = 0;
    double bin_width = 1.0, horizon = 0.0;
    std::string kernel = "epanechnikov", smoother = "ll", bandwidth = "1,1", grid;
    double tolerance = 1e-8;
    std::size_t max_iter = 500;
    std::size_t periods = 0;
    std::string baseline = "none", density = "life-table";
    std::size_t refinement = 1;
    bool keep_closure = false;
    std::string leave_out = "event";
};

std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(std::string("bad number '") + item + "' in " + what);
        }
    }
    if (v.empty()) throw UsageError(std::string("empty list for ") + what);
    return v;
}

Bandwidth parse_bandwidth(const std::string& s) {
    auto b = parse_list(s, "--bandwidth");
    if (b.size() == 1) b.push_back(b[0]);
    if (b.size() != 2) throw UsageError("--bandwidth takes b0,b1");
    for (double v : b)
        if (!(v > 0.0)) throw UsageError("bandwidths must be positive");
    return b;
}

// "0.5,1,2;1,2" -> per-axis lists; a single list is used for both axes.
std::vector<Bandwidth> parse_grid(const std::string& s) {
    std::vector<std::vector<double>> axes;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ';')) axes.push_back(parse_list(part, "--grid"));
    if (axes.size() == 1) axes.push_back(axes[0]);
    if (axes.size() != 2) throw UsageError("--grid takes 'b0 list;b1 list'");
    for (const auto& a : axes)
        for (double v : a)
            if (!(v > 0.0)) throw UsageError("bandwidths must be positive");
    return bandwidth_grid(axes);
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_num(v[i]);
    return s;
}

// Config values apply only to flags not given on the command line.
template <class T>
void from_config(const CLI::App* sub, const json& cfg, const char* flag, const char* key, T& v) {
    // keys for options this subcommand does not have are ignored
    if (!sub->get_option_no_throw(flag) || sub->count(flag) || !cfg.contains(key)) return;
    v = cfg.at(key).get<T>();
}

void apply_config(const CLI::App* sub, Options& o, json& scenario_cfg) {
    if (o.config.empty()) return;
    std::ifstream in(o.config);
    if (!in) throw UsageError("cannot open config file: " + o.config);
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError("config " + o.config + ": " + e.what());
    }
    from_config(sub, cfg, "--out", "out", o.out);
    from_config(sub, cfg, "--input", "input", o.input);
    from_config(sub, cfg, "--input-format", "input_format", o.input_format);
    from_config(sub, cfg, "--workers", "workers", o.workers);
    from_config(sub, cfg, "--seed", "seed", o.seed);
    from_config(sub, cfg, "--bin-width", "bin_width", o.bin_width);
    from_config(sub, cfg, "--horizon", "horizon", o.horizon);
    from_config(sub, cfg, "--kernel", "kernel", o.kernel);
    from_config(sub, cfg, "--smoother", "smoother", o.smoother);
    from_config(sub, cfg, "--tolerance", "tolerance", o.tolerance);
    from_config(sub, cfg, "--max-iter", "max_iter", o.max_iter);
    from_config(sub, cfg, "--periods", "periods", o.periods);
    from_config(sub, cfg, "--baseline", "baseline", o.baseline);
    from_config(sub, cfg, "--density", "density", o.density);
    from_config(sub, cfg, "--refinement", "refinement", o.refinement);
    from_config(sub, cfg, "--n", "n", o.n);
    from_config(sub, cfg, "--keep-closure", "keep_closure", o.keep_closure);
    from_config(sub, cfg, "--leave-out", "leave_out", o.leave_out);
    auto unset = [&](const char* flag) { return sub->get_option_no_throw(flag) && !sub->count(flag); };
    if (unset("--bandwidth") && cfg.contains("bandwidth")) o.bandwidth = join(cfg["bandwidth"].get<std::vector<double>>());
    if (unset("--grid") && cfg.contains("grid")) {
        auto g = cfg["grid"].get<std::vector<std::vector<double>>>();
        o.grid.clear();
        for (std::size_t a = 0; a < g.size(); ++a) o.grid += (a ? ";" : "") + join(g[a]);
    }
    if (cfg.contains("scenario")) scenario_cfg = cfg["scenario"];
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

fs::path out_dir(const Options& o) {
    fs::path d(o.out);
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + d.string() + ": " + ec.message());
    return d;
}

bool looks_like_events(const std::string& path) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        return line.compare(b, 5, "delay") == 0;
    }
    return false;
}

RunoffTriangle load_input(const Options& o, std::vector<std::string>& log) {
    if (o.input.empty()) throw UsageError("--input is required");
    if (!fs::exists(o.input)) throw UsageError("input file not found: " + o.input);
    if (!(o.bin_width > 0.0)) throw UsageError("--bin-width must be positive");
    std::string fmt = o.input_format;
    if (fmt == "auto") fmt = looks_like_events(o.input) ? "events" : "triangle";
    if (fmt == "triangle") return load_triangle(o.input, o.bin_width);
    if (fmt != "events") throw UsageError("--input-format must be auto, triangle or events");
    auto s = load_events(o.input, o.horizon);
    return bin_events(s, o.bin_width, &log);
}

BackfitConfig backfit_config(const Options& o) {
    if (!(o.tolerance > 0.0)) throw UsageError("--tolerance must be positive");
    if (o.max_iter < 1) throw UsageError("--max-iter must be >= 1");
    BackfitConfig c;
    c.tolerance = o.tolerance;
    c.max_iterations = o.max_iter;
    return c;
}

Kernel kernel_of(const Options& o) {
    try {
        return parse_kernel(o.kernel);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

Smoother smoother_of(const Options& o) {
    try {
        return parse_smoother(o.smoother);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

DensityOptions density_of(const Options& o) {
    DensityOptions d;
    try {
        d.rule = parse_density_rule(o.density);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (o.refinement < 1) throw UsageError("--refinement must be >= 1");
    d.refinement = o.refinement;
    return d;
}

json diagnostics(const HazardSurface& s, const MultiplicativeFit& f) {
    return {{"clip_count", s.clip_count},
            {"fallback_count", s.fallback_count},
            {"extension_cells", f.extension_cells()},
            {"frozen_cells", f.frozen_cells},
            {"residual", f.residual},
            {"iterations", f.iterations},
            {"converged", f.converged}};
}

void write_surfaces(const fs::path& dir, const OccurrenceExposureGrid& g, const HazardSurface& s, const MultiplicativeFit& f) {
    std::ostringstream os;
    os << "reversed_time,underwriting,occurrence,exposure,smoothed_occurrence,smoothed_exposure,hazard,fitted\n";
    const auto& sh = g.shape;
    for (std::size_t r = 0; r < sh.axis(0).n; ++r)
        for (std::size_t z = 0; z < sh.axis(1).n; ++z) {
            const auto c = sh.flat(r, z);
            if (!g.support[c]) continue;
            os << fmt_num(sh.axis(0).center(r)) << ',' << fmt_num(sh.axis(1).center(z)) << ',' << fmt_num(g.occurrence[c]) << ','
               << fmt_num(g.exposure[c]) << ',' << fmt_num(s.smoothed_occurrence[c]) << ',' << fmt_num(s.smoothed_exposure[c])
               << ',' << (s.valid[c] ? fmt_num(s.hazard[c]) : "") << ',' << fmt_num(evaluate_product(f, c)) << '\n';
        }
    write_file(dir / "surface.csv", os.str());

    std::ostringstream cs;
    cs << "axis,index,coordinate,value,active\n";
    for (std::size_t k = 0; k < f.rank(); ++k)
        for (std::size_t i = 0; i < f.components[k].size(); ++i)
            cs << k << ',' << i << ',' << fmt_num(sh.axis(k).center(i)) << ',' << fmt_num(f.components[k][i]) << ','
               << int(f.active[k][i]) << '\n';
    write_file(dir / "components.csv", cs.str());
}

json fit_report(const Options& o, const RunoffTriangle& tri, const Bandwidth& bw, const HazardSurface& s,
                const MultiplicativeFit& f) {
    json j;
    j["r0"] = tri.r0;
    j["bin_width"] = tri.bin_width;
    j["kernel"] = o.kernel;
    j["smoother"] = o.smoother;
    j["bandwidth"] = bw;
    j["keep_closure"] = o.keep_closure;
    j["fit"] = fit_to_json(f);
    j["diagnostics"] = diagnostics(s, f);
    j["diagnostics"]["warnings"] = s.warnings;
    return j;
}

int cmd_simulate(const Options& o, const CLI::App* sub, json scenario) {
    if (!o.scenario.empty()) {
        std::ifstream in(o.scenario);
        if (!in) throw UsageError("cannot open scenario file: " + o.scenario);
        try {
            scenario = json::parse(in);
        } catch (const json::exception& e) {
            throw UsageError("scenario " + o.scenario + ": " + e.what());
        }
    }
    if (scenario.is_null()) throw UsageError("simulate needs --scenario or a 'scenario' entry in --config");
    SimScenario sc;
    try {
        sc = scenario_from_json(scenario);
        sc.validate();
    } catch (const std::exception& e) {
        throw UsageError(std::string("scenario: ") + e.what());
    }
    if (sub->count("--seed") || !scenario.contains("seed")) sc.seed = o.seed;
    if (o.n) sc.n_retained = o.n;
    auto run = simulate_detailed(sc);
    const auto dir = out_dir(o);
    std::ostringstream os;
    write_events(os, run.sample);
    write_file(dir / "events.csv", os.str());
    if (!(o.bin_width > 0.0)) throw UsageError("--bin-width must be positive");
    std::ostringstream ts;
    write_triangle(ts, bin_events(run.sample, o.bin_width));
    write_file(dir / "triangle.csv", ts.str());
    std::cout << "events " << run.sample.events.size() << " draws " << run.draws << " outstanding " << run.outstanding << '\n';
    return kOk;
}

int cmd_estimate(const Options& o) {
    std::vector<std::string> log;
    auto tri = load_input(o, log);
    const auto bw = parse_bandwidth(o.bandwidth);
    auto g = estimation_grid(tri, o.keep_closure);
    auto s = smooth(g, kernel_of(o), bw, smoother_of(o));
    auto f = backfit(s, backfit_config(o));
    const auto dir = out_dir(o);
    write_file(dir / "fit.json", fit_report(o, tri, bw, s, f).dump(2) + "\n");
    write_surfaces(dir, g, s, f);
    for (const auto& w : s.warnings) log.push_back(w);
    log.push_back("sweeps " + std::to_string(f.iterations) + " residual " + fmt_num(f.residual) +
                  (f.converged ? " converged" : " not converged"));
    std::string text;
    for (const auto& l : log) text += l + "\n";
    write_file(dir / "estimate.log", text);
    if (!f.converged) {
        std::cerr << "backfitting did not converge: residual " << fmt_num(f.residual) << " after " << f.iterations << " sweeps\n";
        return kNoConvergence;
    }
    std::cout << "alpha_star " << fmt_num(f.alpha_star) << " sweeps " << f.iterations << " residual " << fmt_num(f.residual) << '\n';
    return kOk;
}

int cmd_cv(const Options& o) {
    std::vector<std::string> log;
    auto tri = load_input(o, log);
    auto g = estimation_grid(tri, o.keep_closure);
    if (o.leave_out != "event" && o.leave_out != "cell") throw UsageError("--leave-out must be event or cell");
    const auto mode = o.leave_out == "cell" ? LeaveOut::cell : LeaveOut::event;
    const auto cands = parse_grid(o.grid.empty() ? "0.5,0.75,1,1.5,2,3" : o.grid);
    const auto k = kernel_of(o);
    const auto m = smoother_of(o);
    const auto cfg = backfit_config(o);
    std::vector<CvScore> scores(cands.size());
    int status = kOk;
    std::size_t best = cands.size();
    try {
        auto grid = select_bandwidth_with(
            cands,
            [&](const Bandwidth& b) {
                auto s = cv_score(g, k, b, cfg, m, mode);
                const auto i = static_cast<std::size_t>(std::find(cands.begin(), cands.end(), b) - cands.begin());
                scores[i] = s;
                return s;
            },
            o.workers);
        scores = grid.results;
        best = grid.best_index;
    } catch (const std::runtime_error& e) {
        std::cerr << e.what() << '\n';
        status = kNoConvergence;
    }
    std::ostringstream os;
    os << "b0,b1,score,fit_term,leave_out_term,converged,sweeps,leave_outs,failed_leave_outs,best,error\n";
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const auto& s = scores[i];
        os << fmt_num(cands[i][0]) << ',' << fmt_num(cands[i][1]) << ',' << fmt_num(s.score) << ',' << fmt_num(s.fit_term) << ','
           << fmt_num(s.leave_out_term) << ',' << int(s.converged) << ',' << s.sweeps << ',' << s.leave_outs << ','
           << s.failed_leave_outs << ',' << int(i == best) << ',';
        std::string err = s.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << err << '\n';
    }
    write_file(out_dir(o) / "cv.csv", os.str());
    if (status == kOk)
        std::cout << "best bandwidth " << join(cands[best]) << " score " << fmt_num(scores[best].score) << '\n';
    return status;
}

int cmd_forecast(const Options& o) {
    std::vector<std::string> log;
    auto tri = load_input(o, log);
    if (o.baseline != "none" && o.baseline != "clm") throw UsageError("--baseline must be none or clm");
    PipelineConfig cfg;
    cfg.kernel = kernel_of(o);
    cfg.smoother = smoother_of(o);
    cfg.bandwidth = parse_bandwidth(o.bandwidth);
    cfg.backfit = backfit_config(o);
    cfg.density = density_of(o);
    cfg.periods = o.periods;
    cfg.keep_closure = o.keep_closure;
    auto res = forecast_ph(tri, cfg);
    const auto& fc = res.forecast;
    json j = forecast_to_json(fc);
    j["bandwidth"] = cfg.bandwidth;
    j["density_rule"] = to_string(cfg.density.rule);
    j["diagnostics"] = diagnostics(res.surface, res.fit);

    const auto dir = out_dir(o);
    std::ostringstream cf;
    cf << "period,count\n";
    for (std::size_t a = 0; a < fc.cash_flow.size(); ++a) cf << a + 1 << ',' << fmt_num(fc.cash_flow[a]) << '\n';
    write_file(dir / "cashflow.csv", cf.str());

    std::ostringstream dens;
    dens << "underwriting,delay,density\n";
    const auto& d = res.density;
    for (std::size_t z = 0; z < d.f.size(); ++z)
        for (std::size_t t = 0; t < d.r0; ++t)
            dens << fmt_num((z + 0.5) * d.width) << ',' << fmt_num((t + 0.5) * d.width) << ',' << fmt_num(d.f[z][t]) << '\n';
    write_file(dir / "density.csv", dens.str());

    if (o.baseline == "clm") {
        auto cl = chain_ladder(tri, fc.cash_flow.size());
        j["baseline"] = forecast_to_json(cl);
        std::ostringstream tab;
        tab << "method,total";
        for (std::size_t a = 0; a < fc.cash_flow.size(); ++a) tab << ',' << a + 1;
        tab << '\n';
        for (const ReserveForecast* r : {&fc, static_cast<const ReserveForecast*>(&cl)}) {
            tab << r->method << ',' << fmt_num(r->total);
            for (double v : r->cash_flow) tab << ',' << fmt_num(v);
            tab << '\n';
        }
        write_file(dir / "comparison.csv", tab.str());
        std::cout << "CLM " << fmt_num(cl.total) << '\n';
    }
    write_file(dir / "forecast.json", j.dump(2) + "\n");
    std::cout << "PH " << fmt_num(fc.total) << '\n';
    if (!res.fit.converged) {
        std::cerr << "backfitting did not converge: residual " << fmt_num(res.fit.residual) << '\n';
        return kNoConvergence;
    }
    return kOk;
}

void add_shared(CLI::App* s, Options& o) {
    s->add_option("--config", o.config, "JSON config; keys match the long flags with '_' for '-'");
    s->add_option("--out", o.out, "output directory")->capture_default_str();
    s->add_option("--workers", o.workers, "worker threads, 0 = all cores")->capture_default_str();
    s->add_option("--seed", o.seed, "random seed")->capture_default_str();
    s->add_option("--bin-width", o.bin_width, "cell width when binning events")->capture_default_str();
    s->add_option("--kernel", o.kernel, "epanechnikov | quartic | uniform")->capture_default_str();
    s->add_option("--smoother", o.smoother, "ll (local linear) | lc (local constant)")->capture_default_str();
    s->add_option("--bandwidth", o.bandwidth, "b0,b1 in cells (reversed time, underwriting)")->capture_default_str();
    s->add_option("--tolerance", o.tolerance, "backfitting tolerance")->capture_default_str();
    s->add_option("--max-iter", o.max_iter, "maximum backfitting sweeps")->capture_default_str();
    s->add_option("--periods", o.periods, "cash-flow periods, 0 = one per cell")->capture_default_str();
    s->add_option("--baseline", o.baseline, "none | clm")->capture_default_str();
    s->add_flag("--keep-closure", o.keep_closure, "estimate on the last reversed cell too (E = O there)");
}

void add_input(CLI::App* s, Options& o) {
    s->add_option("--input", o.input, "triangle CSV or event CSV");
    s->add_option("--input-format", o.input_format, "auto | triangle | events")->capture_default_str();
    s->add_option("--horizon", o.horizon, "horizon for event files without a '# horizon=' line");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structured hazard estimation and reserving on run-off triangles"};
    app.require_subcommand(1);
    Options o;

    auto* sim = app.add_subcommand("simulate", "draw a filtered sample from a multiplicative hazard scenario");
    add_shared(sim, o);
    sim->add_option("--scenario", o.scenario, "scenario JSON (alpha0, alpha1, alpha_star, horizon, ...)");
    sim->add_option("--n", o.n, "retained events (overrides the scenario)");

    auto* est = app.add_subcommand("estimate", "smooth and backfit at a fixed bandwidth");
    add_shared(est, o);
    add_input(est, o);

    auto* cv = app.add_subcommand("cv", "cross-validated bandwidth selection");
    add_shared(cv, o);
    add_input(cv, o);
    cv->add_option("--grid", o.grid, "candidates 'b0 list;b1 list', e.g. 0.5,1,2;1,2,3");
    cv->add_option("--leave-out", o.leave_out, "event | cell")->capture_default_str();

    auto* fc = app.add_subcommand("forecast", "reserve and cash flow");
    add_shared(fc, o);
    add_input(fc, o);
    fc->add_option("--density", o.density, "life-table | midpoint")->capture_default_str();
    fc->add_option("--refinement", o.refinement, "midpoint sub-steps per cell")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        json scenario;
        apply_config(sub, o, scenario);
        if (sub == sim) return cmd_simulate(o, sub, scenario);
        if (sub == est) return cmd_estimate(o);
        if (sub == cv) return cmd_cv(o);
        return cmd_forecast(o);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
}
