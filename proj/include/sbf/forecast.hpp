#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbf/backfit.hpp"
#include "sbf/data_model.hpp"

namespace sbf {

// midpoint: the continuous density alpha(R0-t) exp(-int_0^{R0-t} alpha), inner integral by midpoint sums
//   with the component interpolated linearly between reversed-time cell centres.
// life_table: the fitted value on a cell is read as the probability of reporting within that cell given
//   no report earlier in reversed time (what occurrence over tail-sum exposure estimates); the final
//   reversed cell absorbs the remaining mass because the triangle is fully run off.
enum class DensityRule { life_table, midpoint };

inline DensityRule parse_density_rule(const std::string& s) {
    if (s == "life-table" || s == "life_table") return DensityRule::life_table;
    if (s == "midpoint") return DensityRule::midpoint;
    throw std::invalid_argument("unknown density rule '" + s + "'");
}

inline std::string to_string(DensityRule r) { return r == DensityRule::life_table ? "life-table" : "midpoint"; }

struct DensityOptions {
    DensityRule rule = DensityRule::life_table;
    std::size_t refinement = 1;
};

struct ConditionalDensity {
    std::size_t r0 = 0;
    double width = 1.0;
    DensityRule rule = DensityRule::life_table;
    std::vector<std::vector<double>> f;  // f[z][t]: density on delay cell t for underwriting cell z
    std::size_t extension_cells = 0;

    double horizon() const { return static_cast<double>(r0) * width; }

    // Integral of f_z over the delay interval [a, b], piecewise constant within delay cells.
    double mass(std::size_t z, double a, double b) const {
        a = std::max(a, 0.0);
        b = std::min(b, horizon());
        if (!(b > a)) return 0.0;
        double m = 0.0;
        auto t0 = static_cast<std::size_t>(std::floor(a / width));
        for (std::size_t t = t0; t < r0; ++t) {
            const double lo = static_cast<double>(t) * width, hi = lo + width;
            if (lo >= b) break;
            const double ov = std::min(hi, b) - std::max(lo, a);
            if (ov > 0.0) m += f[z][t] * ov;
        }
        return m;
    }
};

struct ReserveForecast {
    double total = 0.0;
    std::vector<double> cash_flow;
    double period_length = 1.0;
    std::string method;
};

namespace detail {

inline double interp_centres(const std::vector<double>& v, double width, double s) {
    const double x = s / width - 0.5;
    if (x <= 0.0) return v.front();
    const auto n = v.size();
    if (x >= static_cast<double>(n - 1)) return v.back();
    auto i = static_cast<std::size_t>(std::floor(x));
    const double w = x - static_cast<double>(i);
    return (1.0 - w) * v[i] + w * v[i + 1];
}

}  // namespace detail

// Axis 0 of the fit is reversed time, axis 1 underwriting.
inline ConditionalDensity conditional_density(const MultiplicativeFit& fit, const DensityOptions& opt = {}) {
    if (fit.rank() != 2) throw std::invalid_argument("conditional density needs a two-dimensional fit");
    if (opt.refinement < 1) throw std::invalid_argument("refinement must be >= 1");
    const auto& a0 = fit.components[0];
    const auto& a1 = fit.components[1];
    ConditionalDensity d;
    d.r0 = a0.size();
    d.width = fit.shape.axis(0).width;
    d.rule = opt.rule;
    d.extension_cells = fit.extension_cells();
    const std::size_t n = d.r0;
    const double w = d.width;
    d.f.assign(a1.size(), std::vector<double>(n, 0.0));

    for (std::size_t z = 0; z < a1.size(); ++z) {
        const double scale = fit.alpha_star * a1[z];
        if (opt.rule == DensityRule::life_table) {
            double surv = 1.0;
            for (std::size_t r = 0; r < n; ++r) {
                const double q = r + 1 == n ? 1.0 : std::clamp(scale * a0[r] * w, 0.0, 1.0);
                d.f[z][n - 1 - r] = surv * q / w;
                surv *= 1.0 - q;
            }
        } else {
            const std::size_t m = opt.refinement;
            const double h = w / static_cast<double>(m);
            double cum = 0.0;  // integral over [0, r*w)
            for (std::size_t r = 0; r < n; ++r) {
                double half = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double s = static_cast<double>(r) * w + (static_cast<double>(i) + 0.5) * (h / 2.0);
                    half += detail::interp_centres(a0, w, s) * (h / 2.0);
                }
                d.f[z][n - 1 - r] = scale * a0[r] * std::exp(-(cum + scale * half));
                double full = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double s = static_cast<double>(r) * w + (static_cast<double>(i) + 0.5) * h;
                    full += detail::interp_centres(a0, w, s) * h;
                }
                cum += scale * full;
            }
        }
    }
    return d;
}

namespace detail {

inline double observed_mass(const ConditionalDensity& d, std::size_t z, double zpos) {
    const double m = d.mass(z, 0.0, d.horizon() - zpos);
    if (!(m > 1e-12))
        throw std::runtime_error("underwriting cell " + std::to_string(z) +
                                 " has essentially no probability of an observed report");
    return m;
}

}  // namespace detail

// Rows sit at the start of their underwriting cell plus z_offset cells, the convention under which
// a row-z claim is observed iff its delay cell t satisfies t + z <= r0 - 1.
inline double reserve(const std::vector<double>& row_counts, const ConditionalDensity& d, double z_offset = 0.0) {
    double total = 0.0;
    for (std::size_t z = 0; z < row_counts.size(); ++z) {
        if (!(row_counts[z] > 0.0)) continue;
        const double zpos = (static_cast<double>(z) + z_offset) * d.width;
        const double den = detail::observed_mass(d, z, zpos);
        total += row_counts[z] * d.mass(z, d.horizon() - zpos, d.horizon()) / den;
    }
    return total;
}

inline std::vector<double> row_counts(const EventSample& s, double bin_width, std::size_t r0) {
    std::vector<double> n(r0, 0.0);
    for (const auto& e : s.events) {
        auto z = std::min(static_cast<std::size_t>(e.underwriting / bin_width), r0 - 1);
        n[z] += e.weight;
    }
    return n;
}

inline double reserve(const EventSample& s, double bin_width, const ConditionalDensity& d) {
    return reserve(row_counts(s, bin_width, d.r0), d);
}

// Period a covers delays (R0 - Z + (a-1) delta, R0 - Z + a delta] with delta = R0 / periods.
inline ReserveForecast cash_flow(const std::vector<double>& row_counts, const ConditionalDensity& d, std::size_t periods,
                                 double z_offset = 0.0) {
    if (periods < 1) throw std::invalid_argument("periods must be >= 1");
    ReserveForecast out;
    out.method = "PH";
    out.period_length = d.horizon() / static_cast<double>(periods);
    out.cash_flow.assign(periods, 0.0);
    const double R = d.horizon();
    for (std::size_t z = 0; z < row_counts.size(); ++z) {
        if (!(row_counts[z] > 0.0)) continue;
        const double zpos = (static_cast<double>(z) + z_offset) * d.width;
        const double den = detail::observed_mass(d, z, zpos);
        for (std::size_t a = 1; a <= periods; ++a) {
            const double lo = std::min(R - zpos + static_cast<double>(a - 1) * out.period_length, R);
            const double hi = std::min(R - zpos + static_cast<double>(a) * out.period_length, R);
            out.cash_flow[a - 1] += row_counts[z] * d.mass(z, lo, hi) / den;
        }
    }
    out.total = reserve(row_counts, d, z_offset);
    return out;
}

// Classical chain ladder on the forward triangle. Cash flow assigns the projected increment of
// delay cell t in row z, which lies t - (r0-1-z) cells past the valuation date, to periods by overlap.
inline ReserveForecast chain_ladder(const RunoffTriangle& tri, std::size_t periods) {
    if (periods < 1) throw std::invalid_argument("periods must be >= 1");
    const RunoffTriangle fwd = tri.reversed ? reverse_time(tri) : tri;
    fwd.validate();
    const std::size_t n = fwd.r0;
    std::vector<std::vector<double>> cum(n, std::vector<double>(n, 0.0));
    for (std::size_t z = 0; z < n; ++z) {
        double c = 0.0;
        for (std::size_t t = 0; t + z < n; ++t) {
            c += static_cast<double>(fwd.at(t, z));
            cum[z][t] = c;
        }
    }
    std::vector<double> factor(n > 0 ? n - 1 : 0, 1.0);
    for (std::size_t t = 0; t + 1 < n; ++t) {
        double num = 0.0, den = 0.0;
        for (std::size_t z = 0; z + t + 2 <= n; ++z) {
            num += cum[z][t + 1];
            den += cum[z][t];
        }
        if (!(den > 0.0)) throw std::runtime_error("chain ladder: zero cumulative total in development column " + std::to_string(t));
        factor[t] = num / den;
    }
    ReserveForecast out;
    out.method = "CLM";
    out.period_length = static_cast<double>(n) * fwd.bin_width / static_cast<double>(periods);
    const double delta = static_cast<double>(n) / static_cast<double>(periods);  // in cells
    out.cash_flow.assign(periods, 0.0);
    for (std::size_t z = 0; z < n; ++z) {
        const std::size_t last = n - 1 - z;
        double c = cum[z][last];
        for (std::size_t t = last + 1; t < n; ++t) {
            const double next = c * factor[t - 1];
            const double inc = next - c;
            c = next;
            const double lo = static_cast<double>(t - last - 1), hi = lo + 1.0;
            for (std::size_t a = 0; a < periods; ++a) {
                const double plo = static_cast<double>(a) * delta, phi = plo + delta;
                const double ov = std::min(hi, phi) - std::max(lo, plo);
                if (ov > 0.0) out.cash_flow[a] += inc * ov;
            }
        }
        out.total += c - cum[z][last];
    }
    return out;
}

}  // namespace sbf
