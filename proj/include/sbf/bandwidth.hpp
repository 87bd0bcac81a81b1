#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sbf/backfit.hpp"
#include "sbf/data_model.hpp"
#include "sbf/smoothing.hpp"

namespace sbf {

// event: one event is removed from the left-out cell (individual-level leave-one-out).
// cell: the whole occurrence of the cell is zeroed, exposure kept.
enum class LeaveOut { event, cell };

struct CvScore {
    Bandwidth bandwidth;
    double score = std::numeric_limits<double>::infinity();
    double fit_term = 0.0;        // sum alpha^2 E
    double leave_out_term = 0.0;  // sum alpha^[c](c) O_c
    bool converged = false;
    std::size_t sweeps = 0;
    std::size_t leave_outs = 0;
    std::size_t failed_leave_outs = 0;
    std::string error;
};

struct CvGrid {
    std::vector<Bandwidth> candidates;
    std::vector<CvScore> results;
    std::size_t best_index = 0;

    const CvScore& best() const { return results[best_index]; }
};

// Q = sum_c alpha(c)^2 E_c - 2 sum_{O_c > 0} alpha^[c](c) O_c, with alpha the backfitted product and
// alpha^[c] the fit recomputed with cell c left out (see LeaveOut).
inline CvScore cv_score(const OccurrenceExposureGrid& g, const Kernel& k, const Bandwidth& bw, const BackfitConfig& cfg,
                        Smoother method = Smoother::local_linear, LeaveOut mode = LeaveOut::event) {
    bool events = false;
    for (std::size_t f = 0; f < g.shape.size(); ++f) events = events || (g.support[f] && g.occurrence[f] > 0.0);
    if (!events) throw std::runtime_error("no events");

    CvScore out;
    out.bandwidth = bw;
    try {
        const SmoothingPlan plan = make_plan(g, k, bw, method);
        const HazardSurface full = apply_plan(plan, g.occurrence);
        BackfitConfig base = cfg;
        base.warm_start = nullptr;
        const MultiplicativeFit fit = backfit(full, base);
        out.sweeps = fit.iterations;
        if (!fit.converged) {
            out.error = "backfitting did not converge (residual " + std::to_string(fit.residual) + ")";
            return out;
        }
        for (std::size_t f = 0; f < g.shape.size(); ++f) {
            if (!g.support[f]) continue;
            const double a = evaluate_product(fit, f);
            out.fit_term += a * a * g.exposure[f];
        }
        BackfitConfig warm = cfg;
        warm.warm_start = &fit;
        for (std::size_t c = 0; c < g.shape.size(); ++c) {
            if (!g.support[c] || !(g.occurrence[c] > 0.0)) continue;
            ++out.leave_outs;
            try {
                const double removed = mode == LeaveOut::event ? std::min(1.0, g.occurrence[c]) : g.occurrence[c];
                const HazardSurface s = leave_out(plan, full, c, removed);
                const MultiplicativeFit fc = backfit(s, warm);
                if (!fc.converged) {
                    ++out.failed_leave_outs;
                    continue;
                }
                out.leave_out_term += evaluate_product(fc, c) * g.occurrence[c];
            } catch (const std::exception&) {
                ++out.failed_leave_outs;
            }
        }
        if (out.failed_leave_outs) {
            out.error = std::to_string(out.failed_leave_outs) + " leave-out fits failed";
            return out;
        }
        out.converged = true;
        out.score = out.fit_term - 2.0 * out.leave_out_term;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

inline std::size_t resolve_workers(std::size_t workers) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    return workers;
}

// Runs scorer over the candidates (in parallel when workers > 1) and picks the minimum score;
// ties go to the lexicographically smallest bandwidth.
template <class Scorer>
CvGrid select_bandwidth_with(const std::vector<Bandwidth>& candidates, Scorer&& scorer, std::size_t workers = 1) {
    if (candidates.empty()) throw std::invalid_argument("no bandwidth candidates");
    CvGrid grid;
    grid.candidates = candidates;
    grid.results.resize(candidates.size());
    workers = std::min(resolve_workers(workers), candidates.size());
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < candidates.size();) {
            try {
                grid.results[i] = scorer(candidates[i]);
            } catch (const std::exception& e) {
                grid.results[i].error = e.what();
            }
            grid.results[i].bandwidth = candidates[i];
        }
    };
    if (workers <= 1) {
        run();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
        for (auto& t : pool) t.join();
    }

    bool found = false;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double s = grid.results[i].score;
        if (std::isnan(s) || s == std::numeric_limits<double>::infinity()) continue;
        if (!found) {
            grid.best_index = i;
            found = true;
            continue;
        }
        const double b = grid.results[grid.best_index].score;
        if (s < b || (s == b && candidates[i] < candidates[grid.best_index])) grid.best_index = i;
    }
    if (!found) {
        std::string msg = "all bandwidth candidates failed:";
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            msg += " [";
            for (std::size_t a = 0; a < candidates[i].size(); ++a) msg += (a ? "," : "") + std::to_string(candidates[i][a]);
            msg += "] " + (grid.results[i].error.empty() ? std::string("non-finite score") : grid.results[i].error) + ";";
        }
        throw std::runtime_error(msg);
    }
    return grid;
}

inline CvGrid select_bandwidth(const OccurrenceExposureGrid& g, const Kernel& k, const std::vector<Bandwidth>& candidates,
                               const BackfitConfig& cfg, Smoother method = Smoother::local_linear,
                               std::size_t workers = 1, LeaveOut mode = LeaveOut::event) {
    return select_bandwidth_with(
        candidates, [&](const Bandwidth& bw) { return cv_score(g, k, bw, cfg, method, mode); }, workers);
}

// Cartesian product of per-axis candidate lists, lexicographic order.
inline std::vector<Bandwidth> bandwidth_grid(const std::vector<std::vector<double>>& per_axis) {
    std::vector<Bandwidth> out{{}};
    for (const auto& vals : per_axis) {
        std::vector<Bandwidth> next;
        for (const auto& prefix : out)
            for (double v : vals) {
                auto b = prefix;
                b.push_back(v);
                next.push_back(std::move(b));
            }
        out = std::move(next);
    }
    return out;
}

}  // namespace sbf
