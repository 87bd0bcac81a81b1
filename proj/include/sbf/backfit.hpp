#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbf/grid.hpp"
#include "sbf/smoothing.hpp"

namespace sbf {

enum class NormWeights { exposure, uniform };

struct MultiplicativeFit {
    Shape shape;
    double alpha_star = 1.0;
    std::vector<std::vector<double>> components;
    std::vector<std::vector<double>> norm_weights;
    std::vector<Mask> active;  // cells outside hold the nearest active value
    double residual = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
    std::size_t frozen_cells = 0;

    std::size_t rank() const { return components.size(); }

    std::size_t extension_cells() const {
        std::size_t n = 0;
        for (const auto& m : active)
            for (char a : m) n += !a;
        return n;
    }
};

struct BackfitConfig {
    std::size_t max_iterations = 500;
    double tolerance = 1e-8;
    double denominator_floor = 1e-10;
    NormWeights weights = NormWeights::exposure;
    const MultiplicativeFit* warm_start = nullptr;
};

inline double evaluate_product(const MultiplicativeFit& fit, const std::vector<std::size_t>& idx) {
    double v = fit.alpha_star;
    for (std::size_t k = 0; k < fit.rank(); ++k) v *= fit.components[k][idx[k]];
    return v;
}

inline double evaluate_product(const MultiplicativeFit& fit, std::size_t flat) {
    double v = fit.alpha_star;
    for (std::size_t k = 0; k < fit.rank(); ++k) v *= fit.components[k][fit.shape.coord(flat, k)];
    return v;
}

namespace detail {

// Marginal over the valid cells of alpha* * prod_{j != k} alpha_j * Ê.
inline std::vector<double> backfit_denominator(const HazardSurface& s, const std::vector<std::vector<double>>& comp,
                                               double alpha_star, std::size_t k) {
    const Shape& sh = s.shape;
    std::vector<double> den(sh.axis(k).n, 0.0);
    const double dv = sh.cell_volume() / sh.axis(k).width;
    for (std::size_t f = 0; f < sh.size(); ++f) {
        if (!s.valid[f]) continue;
        double p = alpha_star * s.smoothed_exposure[f];
        for (std::size_t j = 0; j < comp.size(); ++j)
            if (j != k) p *= comp[j][sh.coord(f, j)];
        den[sh.coord(f, k)] += p * dv;
    }
    return den;
}

inline void extend_nearest(std::vector<double>& c, const Mask& active) {
    const std::size_t n = c.size();
    std::vector<long> left(n, -1), right(n, -1);
    long last = -1;
    for (std::size_t i = 0; i < n; ++i) {
        if (active[i]) last = static_cast<long>(i);
        left[i] = last;
    }
    last = -1;
    for (std::size_t i = n; i-- > 0;) {
        if (active[i]) last = static_cast<long>(i);
        right[i] = last;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (active[i]) continue;
        long l = left[i], r = right[i];
        if (l < 0 && r < 0) continue;
        long pick = l < 0 ? r : (r < 0 ? l : ((static_cast<long>(i) - l) <= (r - static_cast<long>(i)) ? l : r));
        c[i] = c[static_cast<std::size_t>(pick)];
    }
}

inline Mask fitted_region(const HazardSurface& s, const MultiplicativeFit& fit) {
    Mask m(s.shape.size(), 0);
    for (std::size_t f = 0; f < s.shape.size(); ++f) {
        if (!s.valid[f]) continue;
        bool in = true;
        for (std::size_t k = 0; k < fit.rank() && in; ++k) in = fit.active[k][s.shape.coord(f, k)];
        m[f] = in;
    }
    return m;
}

}  // namespace detail

// Sup over k and active x_k of |lhs - rhs| / (|rhs| + 1e-12 max|rhs|) for the backfitting system.
inline double residual(const HazardSurface& s, const MultiplicativeFit& fit) {
    double worst = 0.0;
    for (std::size_t k = 0; k < fit.rank(); ++k) {
        auto rhs = marginal(s.shape, s.smoothed_occurrence, s.valid, k);
        auto den = detail::backfit_denominator(s, fit.components, fit.alpha_star, k);
        double rmax = 0.0;
        for (std::size_t i = 0; i < rhs.size(); ++i)
            if (fit.active[k][i]) rmax = std::max(rmax, std::abs(rhs[i]));
        for (std::size_t i = 0; i < rhs.size(); ++i) {
            if (!fit.active[k][i]) continue;
            const double lhs = fit.components[k][i] * den[i];
            worst = std::max(worst, std::abs(lhs - rhs[i]) / (std::abs(rhs[i]) + 1e-12 * rmax));
        }
    }
    return worst;
}

// Fitted total alpha* prod alpha_j Ê and smoothed total Ô over the region where every coordinate is active.
inline std::pair<double, double> occurrence_totals(const HazardSurface& s, const MultiplicativeFit& fit) {
    const Mask region = detail::fitted_region(s, fit);
    double fitted = 0.0, smoothed = 0.0;
    for (std::size_t f = 0; f < s.shape.size(); ++f) {
        if (!region[f]) continue;
        fitted += evaluate_product(fit, f) * s.smoothed_exposure[f];
        smoothed += s.smoothed_occurrence[f];
    }
    const double dv = s.shape.cell_volume();
    return {fitted * dv, smoothed * dv};
}

inline MultiplicativeFit backfit(const HazardSurface& s, const BackfitConfig& cfg = {}) {
    if (!(cfg.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (cfg.max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    const Shape& sh = s.shape;
    const std::size_t d = sh.rank();
    bool any = false;
    for (char v : s.valid) any = any || v;
    if (!any) throw std::runtime_error("surface has no valid cells");

    MultiplicativeFit fit;
    fit.shape = sh;
    fit.components.resize(d);
    fit.norm_weights.resize(d);
    fit.active.resize(d);

    std::vector<std::vector<double>> num(d);
    for (std::size_t k = 0; k < d; ++k) {
        const auto& ax = sh.axis(k);
        auto em = marginal(sh, s.smoothed_exposure, s.valid, k);
        num[k] = marginal(sh, s.smoothed_occurrence, s.valid, k);
        const double emax = *std::max_element(em.begin(), em.end());
        fit.active[k].assign(ax.n, 0);
        double esum = 0.0;
        std::size_t nact = 0;
        double osum = 0.0;
        for (std::size_t i = 0; i < ax.n; ++i) {
            fit.active[k][i] = em[i] > cfg.denominator_floor * emax;
            if (fit.active[k][i]) {
                esum += em[i] * ax.width;
                ++nact;
                osum += num[k][i];
            }
        }
        if (!(osum > 0.0)) throw std::runtime_error("unidentifiable component on axis " + std::to_string(k));
        fit.norm_weights[k].assign(ax.n, 0.0);
        for (std::size_t i = 0; i < ax.n; ++i)
            if (fit.active[k][i])
                fit.norm_weights[k][i] = cfg.weights == NormWeights::exposure
                                             ? em[i] / esum
                                             : 1.0 / (static_cast<double>(nact) * ax.width);
        if (cfg.warm_start) {
            if (cfg.warm_start->rank() != d || cfg.warm_start->components[k].size() != ax.n)
                throw std::invalid_argument("warm start does not match the surface");
            fit.components[k] = cfg.warm_start->components[k];
        } else {
            fit.components[k].assign(ax.n, 1.0);
        }
    }

    double osum = 0.0, esum = 0.0;
    for (std::size_t f = 0; f < sh.size(); ++f)
        if (s.valid[f]) {
            osum += s.smoothed_occurrence[f];
            esum += s.smoothed_exposure[f];
        }
    const double alpha_init = cfg.warm_start ? cfg.warm_start->alpha_star : osum / esum;

    auto normalise = [&](std::vector<double>& c, std::size_t k) {
        double m = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i)
            if (fit.active[k][i]) m += c[i] * fit.norm_weights[k][i] * sh.axis(k).width;
        if (m > 0.0)
            for (double& v : c) v /= m;
        return m;
    };

    auto finalise = [&](MultiplicativeFit f) {
        for (std::size_t k = 0; k < d; ++k) {
            normalise(f.components[k], k);
            detail::extend_nearest(f.components[k], f.active[k]);
        }
        f.alpha_star = 1.0;
        auto [fitted, smoothed] = occurrence_totals(s, f);
        f.alpha_star = fitted > 0.0 ? smoothed / fitted : 0.0;
        f.residual = residual(s, f);
        return f;
    };

    for (std::size_t k = 0; k < d; ++k) normalise(fit.components[k], k);

    MultiplicativeFit best;
    bool have_best = false;
    for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
        auto old = fit.components;
        for (std::size_t k = 0; k < d; ++k) {
            auto den = detail::backfit_denominator(s, fit.components, alpha_init, k);
            double dmax = 0.0;
            for (std::size_t i = 0; i < den.size(); ++i)
                if (fit.active[k][i]) dmax = std::max(dmax, den[i]);
            for (std::size_t i = 0; i < den.size(); ++i) {
                if (!fit.active[k][i]) continue;
                if (!(den[i] > cfg.denominator_floor * dmax)) {
                    fit.active[k][i] = 0;
                    fit.norm_weights[k][i] = 0.0;
                    ++fit.frozen_cells;
                    continue;
                }
                fit.components[k][i] = num[k][i] / den[i];
            }
        }
        double change = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            normalise(fit.components[k], k);
            double dmax = 0.0, cmax = 0.0;
            for (std::size_t i = 0; i < fit.components[k].size(); ++i) {
                if (!fit.active[k][i]) continue;
                dmax = std::max(dmax, std::abs(fit.components[k][i] - old[k][i]));
                cmax = std::max(cmax, std::abs(old[k][i]));
            }
            change = std::max(change, cmax > 0.0 ? dmax / cmax : dmax);
        }
        fit.iterations = it;
        MultiplicativeFit cur = finalise(fit);
        if (!have_best || cur.residual <= best.residual) {
            best = cur;
            have_best = true;
        }
        if (change < cfg.tolerance && cur.residual <= cfg.tolerance) {
            cur.converged = true;
            return cur;
        }
    }
    best.converged = false;
    best.iterations = cfg.max_iterations;
    return best;
}

// Surface whose smoothed occurrence is the fitted product times the smoothed exposure.
inline HazardSurface project(const HazardSurface& s, const MultiplicativeFit& fit) {
    HazardSurface p = s;
    for (std::size_t f = 0; f < s.shape.size(); ++f) {
        if (!s.valid[f]) continue;
        p.hazard[f] = evaluate_product(fit, f);
        p.smoothed_occurrence[f] = p.hazard[f] * s.smoothed_exposure[f];
        p.raw_occurrence[f] = p.smoothed_occurrence[f];
    }
    p.clip_count = 0;
    return p;
}

// Product surface on a grid, evaluated everywhere.
inline std::vector<double> product_surface(const MultiplicativeFit& fit) {
    std::vector<double> v(fit.shape.size());
    for (std::size_t f = 0; f < v.size(); ++f) v[f] = evaluate_product(fit, f);
    return v;
}

}  // namespace sbf
