#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbf/data_model.hpp"
#include "sbf/grid.hpp"
#include "sbf/kernel.hpp"

namespace sbf {

// Per-axis bandwidth in the axis' own units (cells for run-off grids).
using Bandwidth = std::vector<double>;

enum class Smoother { local_constant, local_linear };

inline Smoother parse_smoother(const std::string& s) {
    if (s == "ll" || s == "local_linear" || s == "local-linear") return Smoother::local_linear;
    if (s == "lc" || s == "local_constant" || s == "local-constant") return Smoother::local_constant;
    throw std::invalid_argument("unknown smoother '" + s + "'");
}

struct HazardSurface {
    Shape shape;
    std::vector<double> smoothed_occurrence;  // after clipping
    std::vector<double> smoothed_exposure;
    std::vector<double> hazard;
    Mask valid;
    std::vector<double> raw_occurrence;  // before clipping, needed for exact leave-out updates
    std::size_t clip_count = 0;
    std::size_t fallback_count = 0;
    std::vector<std::string> warnings;
};

// Boundary normalisation over the full rectangle spanned by the axes.
inline double kappa(const Shape& s, const Kernel& k, const Bandwidth& bw, const std::vector<std::size_t>& idx) {
    double m = 1.0;
    for (std::size_t a = 0; a < s.rank(); ++a) {
        const auto& ax = s.axis(a);
        m *= k.mass(ax.center(idx[a]), ax.origin, ax.origin + ax.length(), bw[a]);
    }
    return 1.0 / m;
}

// Sparse weights W(i, j) with Ô(i) = sum_j W(i, j) O(j) and Ê(i) = sum_j W(i, j) E(j).
// The weights depend on exposure (local linear) but not on occurrence, so a plan can be reused
// for every leave-out occurrence pattern.
struct SmoothingPlan {
    Shape shape;
    Mask support;
    Smoother method = Smoother::local_linear;
    std::vector<std::size_t> row_ptr;
    std::vector<std::uint32_t> col;
    std::vector<double> weight;
    std::vector<std::size_t> rev_ptr;
    std::vector<std::uint32_t> rev_row;
    std::vector<double> rev_weight;
    std::vector<double> smoothed_exposure;
    Mask valid;
    std::size_t fallback_count = 0;
    std::vector<std::string> warnings;
};

namespace detail {

struct AxisWeights {
    std::vector<std::size_t> first;  // first source index with nonzero weight, per eval index
    std::vector<std::vector<double>> w;
};

inline AxisWeights axis_weights(const Axis& ax, const Kernel& k, double b) {
    AxisWeights aw;
    aw.first.resize(ax.n);
    aw.w.resize(ax.n);
    for (std::size_t i = 0; i < ax.n; ++i) {
        const double x = ax.center(i);
        const double lo = x - b, hi = x + b;
        auto j0 = static_cast<long>(std::floor((lo - ax.origin) / ax.width));
        auto j1 = static_cast<long>(std::floor((hi - ax.origin) / ax.width));
        j0 = std::max(j0, 0L);
        j1 = std::min(j1, static_cast<long>(ax.n) - 1);
        aw.first[i] = static_cast<std::size_t>(j0);
        for (long j = j0; j <= j1; ++j)
            aw.w[i].push_back(k.mass(x, ax.lo(static_cast<std::size_t>(j)), ax.hi(static_cast<std::size_t>(j)), b));
    }
    return aw;
}

}  // namespace detail

inline SmoothingPlan make_plan(const OccurrenceExposureGrid& g, const Kernel& k, const Bandwidth& bw, Smoother method) {
    const Shape& s = g.shape;
    const std::size_t d = s.rank();
    if (bw.size() != d) throw std::invalid_argument("bandwidth has " + std::to_string(bw.size()) + " components, grid has " +
                                                    std::to_string(d) + " axes");
    for (double b : bw)
        if (!(b > 0.0)) throw std::invalid_argument("bandwidth components must be positive");

    SmoothingPlan p;
    p.shape = s;
    p.support = g.support;
    p.method = method;
    for (std::size_t a = 0; a < d; ++a)
        if (bw[a] < s.axis(a).width)
            p.warnings.push_back("bandwidth on axis " + std::to_string(a) +
                                 " is below one cell; the estimator degenerates towards the raw ratio");

    std::vector<detail::AxisWeights> aw;
    for (std::size_t a = 0; a < d; ++a) aw.push_back(detail::axis_weights(s.axis(a), k, bw[a]));

    p.row_ptr.assign(1, 0);
    p.smoothed_exposure.assign(s.size(), 0.0);
    std::vector<std::uint32_t> nb;
    std::vector<double> om;
    std::vector<double> dist;  // d entries per neighbour
    std::vector<std::size_t> idx(d), lo(d), cnt(d), off(d);

    for (std::size_t f = 0; f < s.size(); ++f) {
        nb.clear();
        om.clear();
        dist.clear();
        if (g.support[f]) {
            for (std::size_t a = 0; a < d; ++a) {
                idx[a] = s.coord(f, a);
                lo[a] = aw[a].first[idx[a]];
                cnt[a] = aw[a].w[idx[a]].size();
                off[a] = 0;
            }
            // odometer over the neighbourhood box
            bool done = false;
            while (!done) {
                std::size_t src = 0;
                double w = 1.0;
                for (std::size_t a = 0; a < d; ++a) {
                    src += (lo[a] + off[a]) * s.stride(a);
                    w *= aw[a].w[idx[a]][off[a]];
                }
                if (w > 0.0 && g.support[src]) {
                    nb.push_back(static_cast<std::uint32_t>(src));
                    om.push_back(w);
                    for (std::size_t a = 0; a < d; ++a)
                        dist.push_back(s.axis(a).center(idx[a]) - s.axis(a).center(lo[a] + off[a]));
                }
                std::size_t a = d;
                while (a-- > 0) {
                    if (++off[a] < cnt[a]) break;
                    off[a] = 0;
                    if (a == 0) done = true;
                }
            }

            bool use_lc = method == Smoother::local_constant;
            Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
            if (!use_lc) {
                Eigen::VectorXd c1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
                Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
                for (std::size_t n = 0; n < nb.size(); ++n) {
                    const double we = om[n] * g.exposure[nb[n]];
                    for (std::size_t a = 0; a < d; ++a) {
                        c1(a) += we * dist[n * d + a];
                        for (std::size_t b = 0; b < d; ++b) D(a, b) += we * dist[n * d + a] * dist[n * d + b];
                    }
                }
                Eigen::LDLT<Eigen::MatrixXd> ldlt(D);
                const bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive() && D.diagonal().minCoeff() > 0.0 &&
                                ldlt.rcond() >= 1e-10;
                if (ok) {
                    v = ldlt.solve(c1);
                } else {
                    use_lc = true;
                    ++p.fallback_count;
                }
            }
            const double kap = use_lc ? kappa(s, k, bw, idx) : 1.0;
            double ehat = 0.0;
            for (std::size_t n = 0; n < nb.size(); ++n) {
                double w = om[n];
                if (use_lc) {
                    w *= kap;
                } else {
                    double dv = 0.0;
                    for (std::size_t a = 0; a < d; ++a) dv += dist[n * d + a] * v(static_cast<Eigen::Index>(a));
                    w *= 1.0 - dv;
                }
                om[n] = w;
                ehat += w * g.exposure[nb[n]];
            }
            p.smoothed_exposure[f] = ehat;
            p.col.insert(p.col.end(), nb.begin(), nb.end());
            p.weight.insert(p.weight.end(), om.begin(), om.end());
        }
        p.row_ptr.push_back(p.col.size());
    }

    double emax = 0.0;
    for (std::size_t f = 0; f < s.size(); ++f)
        if (g.support[f]) emax = std::max(emax, p.smoothed_exposure[f]);
    if (!(emax > 0.0)) throw std::runtime_error("no exposure in range");
    p.valid.assign(s.size(), 0);
    for (std::size_t f = 0; f < s.size(); ++f) p.valid[f] = g.support[f] && p.smoothed_exposure[f] > 1e-12 * emax;

    // reverse index
    p.rev_ptr.assign(s.size() + 1, 0);
    for (auto c : p.col) ++p.rev_ptr[c + 1];
    for (std::size_t f = 0; f < s.size(); ++f) p.rev_ptr[f + 1] += p.rev_ptr[f];
    p.rev_row.resize(p.col.size());
    p.rev_weight.resize(p.col.size());
    std::vector<std::size_t> fill(p.rev_ptr.begin(), p.rev_ptr.end() - 1);
    for (std::size_t f = 0; f < s.size(); ++f)
        for (std::size_t n = p.row_ptr[f]; n < p.row_ptr[f + 1]; ++n) {
            auto pos = fill[p.col[n]]++;
            p.rev_row[pos] = static_cast<std::uint32_t>(f);
            p.rev_weight[pos] = p.weight[n];
        }
    return p;
}

namespace detail {

inline void settle_cell(HazardSurface& h, std::size_t f) {
    if (!h.valid[f]) {
        h.smoothed_occurrence[f] = 0.0;
        h.hazard[f] = 0.0;
        return;
    }
    if (h.raw_occurrence[f] < 0.0) {
        h.smoothed_occurrence[f] = 0.0;
        h.hazard[f] = 0.0;
    } else {
        h.smoothed_occurrence[f] = h.raw_occurrence[f];
        h.hazard[f] = h.raw_occurrence[f] / h.smoothed_exposure[f];
    }
}

}  // namespace detail

inline HazardSurface apply_plan(const SmoothingPlan& p, const std::vector<double>& occurrence) {
    HazardSurface h;
    h.shape = p.shape;
    h.smoothed_exposure = p.smoothed_exposure;
    h.valid = p.valid;
    h.fallback_count = p.fallback_count;
    h.warnings = p.warnings;
    const std::size_t n = p.shape.size();
    h.raw_occurrence.assign(n, 0.0);
    h.smoothed_occurrence.assign(n, 0.0);
    h.hazard.assign(n, 0.0);
    for (std::size_t f = 0; f < n; ++f) {
        double o = 0.0;
        for (std::size_t k = p.row_ptr[f]; k < p.row_ptr[f + 1]; ++k) o += p.weight[k] * occurrence[p.col[k]];
        h.raw_occurrence[f] = o;
        detail::settle_cell(h, f);
        if (h.valid[f] && o < 0.0) ++h.clip_count;
    }
    return h;
}

// Surface obtained by zeroing the occurrence of source cell c; exposure is unchanged.
inline HazardSurface leave_out(const SmoothingPlan& p, const HazardSurface& full, std::size_t c, double occurrence_c) {
    HazardSurface h = full;
    for (std::size_t k = p.rev_ptr[c]; k < p.rev_ptr[c + 1]; ++k) {
        const std::size_t f = p.rev_row[k];
        const bool before = h.valid[f] && h.raw_occurrence[f] < 0.0;
        h.raw_occurrence[f] -= p.rev_weight[k] * occurrence_c;
        const bool after = h.valid[f] && h.raw_occurrence[f] < 0.0;
        if (before != after) h.clip_count = after ? h.clip_count + 1 : h.clip_count - 1;
        detail::settle_cell(h, f);
    }
    return h;
}

inline HazardSurface smooth(const OccurrenceExposureGrid& g, const Kernel& k, const Bandwidth& bw, Smoother method) {
    return apply_plan(make_plan(g, k, bw, method), g.occurrence);
}

inline HazardSurface smooth_local_constant(const OccurrenceExposureGrid& g, const Kernel& k, const Bandwidth& bw) {
    return smooth(g, k, bw, Smoother::local_constant);
}

inline HazardSurface smooth_local_linear(const OccurrenceExposureGrid& g, const Kernel& k, const Bandwidth& bw) {
    return smooth(g, k, bw, Smoother::local_linear);
}

}  // namespace sbf
