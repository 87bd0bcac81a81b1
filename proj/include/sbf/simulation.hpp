#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <stdexcept>
#include <vector>

#include "sbf/data_model.hpp"

namespace sbf {

// Linear interpolation between nodes, constant beyond the end nodes.
struct PiecewiseLinear {
    std::vector<double> x;
    std::vector<double> y;

    static PiecewiseLinear constant(double v) { return {{0.0}, {v}}; }

    double operator()(double s) const {
        if (x.empty()) throw std::logic_error("empty piecewise-linear table");
        if (s <= x.front()) return y.front();
        if (s >= x.back()) return y.back();
        auto it = std::upper_bound(x.begin(), x.end(), s);
        auto i = static_cast<std::size_t>(it - x.begin()) - 1;
        const double w = (s - x[i]) / (x[i + 1] - x[i]);
        return (1.0 - w) * y[i] + w * y[i + 1];
    }

    void validate(const char* what) const {
        if (x.empty() || x.size() != y.size()) throw std::invalid_argument(std::string(what) + ": table needs matching nonempty x and y");
        for (std::size_t i = 1; i < x.size(); ++i)
            if (!(x[i] > x[i - 1])) throw std::invalid_argument(std::string(what) + ": table nodes must increase");
    }
};

// Exact integral of a piecewise-linear function on [0, hi] and its inverse.
class Cumulative {
public:
    Cumulative(const PiecewiseLinear& f, double hi) : hi_(hi) {
        xs_.push_back(0.0);
        for (double v : f.x)
            if (v > 0.0 && v < hi) xs_.push_back(v);
        xs_.push_back(hi);
        for (double v : xs_) vs_.push_back(f(v));
        cs_.assign(xs_.size(), 0.0);
        for (std::size_t i = 1; i < xs_.size(); ++i)
            cs_[i] = cs_[i - 1] + 0.5 * (vs_[i - 1] + vs_[i]) * (xs_[i] - xs_[i - 1]);
    }

    double total() const { return cs_.back(); }

    double operator()(double s) const {
        s = std::clamp(s, 0.0, hi_);
        auto i = segment_of_x(s);
        const double u = s - xs_[i], L = xs_[i + 1] - xs_[i];
        const double slope = L > 0.0 ? (vs_[i + 1] - vs_[i]) / L : 0.0;
        return cs_[i] + vs_[i] * u + 0.5 * slope * u * u;
    }

    // Smallest s with cumulative(s) = c, for 0 <= c <= total().
    double inverse(double c) const {
        c = std::clamp(c, 0.0, total());
        auto it = std::upper_bound(cs_.begin(), cs_.end(), c);
        std::size_t i = it == cs_.begin() ? 0 : static_cast<std::size_t>(it - cs_.begin()) - 1;
        if (i + 1 >= xs_.size()) return hi_;
        const double L = xs_[i + 1] - xs_[i];
        const double a = 0.5 * (vs_[i + 1] - vs_[i]) / L, b = vs_[i], rem = c - cs_[i];
        double u;
        if (std::abs(a) * L < 1e-14 * std::max(std::abs(b), 1e-300)) {
            u = b > 0.0 ? rem / b : 0.0;
        } else {
            const double disc = std::max(b * b + 4.0 * a * rem, 0.0);
            u = 2.0 * rem / (b + std::sqrt(disc));
        }
        return xs_[i] + std::clamp(u, 0.0, L);
    }

private:
    std::size_t segment_of_x(double s) const {
        auto it = std::upper_bound(xs_.begin(), xs_.end(), s);
        auto i = static_cast<std::size_t>(it - xs_.begin());
        return std::min(i == 0 ? 0 : i - 1, xs_.size() - 2);
    }

    double hi_;
    std::vector<double> xs_, vs_, cs_;
};

struct SimScenario {
    PiecewiseLinear alpha0 = PiecewiseLinear::constant(1.0);  // over reversed time
    PiecewiseLinear alpha1 = PiecewiseLinear::constant(1.0);  // over underwriting time
    double alpha_star = 1.0;
    double horizon = 1.0;
    std::size_t n_target = 1000;  // draws before truncation
    std::size_t n_retained = 0;   // if positive, draw until this many events are retained
    PiecewiseLinear underwriting_density;  // empty: uniform; one node: point mass at that node
    double underwriting_lattice = 0.0;     // if positive, underwriting times are floored to this lattice
    std::uint64_t seed = 1;

    void validate() const {
        alpha0.validate("alpha0");
        alpha1.validate("alpha1");
        if (!(alpha_star > 0.0)) throw std::invalid_argument("alpha_star must be positive");
        if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
        for (double v : alpha0.y)
            if (!(v > 0.0)) throw std::invalid_argument("alpha0 table must be strictly positive");
        for (double v : alpha1.y)
            if (!(v > 0.0)) throw std::invalid_argument("alpha1 table must be strictly positive");
        if (!underwriting_density.x.empty()) {
            underwriting_density.validate("underwriting_density");
            for (double v : underwriting_density.y)
                if (v < 0.0) throw std::invalid_argument("underwriting density must be nonnegative");
        }
    }
};

inline double true_hazard(const SimScenario& s, double t, double z) { return s.alpha_star * s.alpha0(t) * s.alpha1(z); }

// Probability that a claim underwritten at z is reported by the horizon. Claims still open at
// reversed time R0 are placed at T = 0 (fully run off), so this is P(T^R >= z).
inline double observe_probability(const SimScenario& s, double z) {
    const Cumulative A0(s.alpha0, s.horizon);
    return std::exp(-s.alpha_star * s.alpha1(z) * A0(z));
}

struct SimOutput {
    EventSample sample;
    std::size_t draws = 0;
    std::size_t outstanding = 0;  // drawn but not retained
};

inline SimOutput simulate_detailed(const SimScenario& s) {
    s.validate();
    const double R = s.horizon;
    const Cumulative A0(s.alpha0, R);
    const bool point = s.underwriting_density.x.size() == 1;
    const bool uniform = s.underwriting_density.x.empty();
    std::unique_ptr<Cumulative> G;
    if (!point && !uniform) {
        G = std::make_unique<Cumulative>(s.underwriting_density, R);
        if (!(G->total() > 0.0)) throw std::invalid_argument("underwriting density has no mass on [0, horizon]");
    }

    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    SimOutput out;
    out.sample.horizon = R;
    const bool until = s.n_retained > 0;
    const std::size_t max_draws = until ? static_cast<std::size_t>(static_cast<double>(s.n_retained) * 1e4) : s.n_target;
    while (until ? out.sample.events.size() < s.n_retained : out.draws < s.n_target) {
        if (out.draws >= max_draws) throw std::runtime_error("degenerate truncation");
        ++out.draws;
        double z;
        if (point) z = std::clamp(s.underwriting_density.x.front(), 0.0, R);
        else if (uniform) z = unif(rng) * R;
        else z = G->inverse(unif(rng) * G->total());
        if (s.underwriting_lattice > 0.0) z = std::floor(z / s.underwriting_lattice) * s.underwriting_lattice;
        const double e = -std::log1p(-unif(rng));
        const double scale = s.alpha_star * s.alpha1(z);
        const double tr = e >= scale * A0.total() ? R : A0.inverse(e / scale);
        const double t = R - tr;
        if (tr >= z) {
            out.sample.events.push_back({t, z, 1.0});
        } else {
            ++out.outstanding;
        }
    }
    if (out.draws > 0 && static_cast<double>(out.sample.events.size()) < 1e-4 * static_cast<double>(out.draws))
        throw std::runtime_error("degenerate truncation");
    return out;
}

inline EventSample simulate(const SimScenario& s) { return simulate_detailed(s).sample; }

// Expected outstanding count given the observed count per underwriting cell (cells start at
// z * bin_width; all claims of a cell share its start when the lattice equals the bin width).
inline double expected_outstanding(const SimScenario& s, const std::vector<double>& rows, double bin_width) {
    double total = 0.0;
    for (std::size_t z = 0; z < rows.size(); ++z) {
        if (!(rows[z] > 0.0)) continue;
        const double p = observe_probability(s, static_cast<double>(z) * bin_width);
        total += rows[z] * (1.0 - p) / p;
    }
    return total;
}

}  // namespace sbf
