#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbf/grid.hpp"

namespace sbf {

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Counts indexed (t, z). In forward orientation t is the delay cell and a cell is
// observed iff t + z <= r0 - 1. After reverse_time, t is the reversed cell r = r0 - 1 - delay
// and a cell is observed iff z <= r.
struct RunoffTriangle {
    std::size_t r0 = 0;
    double bin_width = 1.0;
    bool reversed = false;
    std::vector<std::int64_t> counts;

    RunoffTriangle() = default;
    RunoffTriangle(std::size_t r0_, double bw = 1.0, bool rev = false)
        : r0(r0_), bin_width(bw), reversed(rev), counts(r0_ * r0_, 0) {
        if (r0_ < 1) throw std::invalid_argument("triangle extent r0 must be >= 1");
    }

    std::int64_t& at(std::size_t t, std::size_t z) { return counts[t * r0 + z]; }
    std::int64_t at(std::size_t t, std::size_t z) const { return counts[t * r0 + z]; }

    bool observed(std::size_t t, std::size_t z) const { return reversed ? z <= t : t + z + 1 <= r0; }

    std::int64_t total() const {
        std::int64_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }

    // Observed claims per underwriting cell.
    std::vector<double> row_totals() const {
        std::vector<double> n(r0, 0.0);
        for (std::size_t t = 0; t < r0; ++t)
            for (std::size_t z = 0; z < r0; ++z) n[z] += static_cast<double>(at(t, z));
        return n;
    }

    void validate() const {
        if (r0 < 1) throw std::invalid_argument("triangle extent r0 must be >= 1");
        if (counts.size() != r0 * r0) throw std::invalid_argument("triangle storage has wrong size");
        for (std::size_t t = 0; t < r0; ++t)
            for (std::size_t z = 0; z < r0; ++z) {
                if (at(t, z) < 0) throw std::invalid_argument("negative count at cell (" + std::to_string(t) + "," + std::to_string(z) + ")");
                if (!observed(t, z) && at(t, z) != 0)
                    throw std::invalid_argument("count outside triangular support at cell (" + std::to_string(t) + "," +
                                                std::to_string(z) + ")");
            }
    }

    bool operator==(const RunoffTriangle& o) const {
        return r0 == o.r0 && bin_width == o.bin_width && reversed == o.reversed && counts == o.counts;
    }
};

struct Event {
    double delay = 0.0;
    double underwriting = 0.0;
    double weight = 1.0;
};

struct EventSample {
    std::vector<Event> events;
    double horizon = 0.0;

    void validate() const {
        for (std::size_t i = 0; i < events.size(); ++i) {
            const auto& e = events[i];
            if (!(e.delay >= 0.0) || !(e.underwriting >= 0.0) || e.delay + e.underwriting > horizon * (1 + 1e-12))
                throw std::invalid_argument("event " + std::to_string(i) + " (delay=" + std::to_string(e.delay) +
                                            ", underwriting=" + std::to_string(e.underwriting) +
                                            ") outside triangular support");
        }
    }
};

// Paired occurrence/exposure surfaces. For run-off data axis 0 is reversed time and axis 1 underwriting.
struct OccurrenceExposureGrid {
    Shape shape;
    std::vector<double> occurrence;
    std::vector<double> exposure;
    Mask support;

    OccurrenceExposureGrid() = default;
    explicit OccurrenceExposureGrid(Shape s)
        : shape(std::move(s)), occurrence(shape.size(), 0.0), exposure(shape.size(), 0.0), support(shape.size(), 1) {}

    double total_occurrence() const {
        double s = 0.0;
        for (std::size_t f = 0; f < shape.size(); ++f)
            if (support[f]) s += occurrence[f];
        return s;
    }
};

inline RunoffTriangle bin_events(const EventSample& sample, double bin_width,
                                 std::vector<std::string>* warnings = nullptr) {
    if (!(bin_width > 0.0)) throw std::invalid_argument("bin_width must be positive");
    sample.validate();
    const double cells = sample.horizon / bin_width;
    auto r0 = static_cast<std::size_t>(std::floor(cells + 1e-9));
    if (r0 < 1) throw std::invalid_argument("horizon shorter than one bin");
    const bool partial = std::abs(cells - static_cast<double>(r0)) > 1e-9;
    if (partial && warnings)
        warnings->push_back("bin width does not divide the horizon; final partial bin dropped");
    const double kept_horizon = static_cast<double>(r0) * bin_width;

    RunoffTriangle tri(r0, bin_width, false);
    std::size_t dropped = 0;
    for (const auto& e : sample.events) {
        if (partial && e.delay + e.underwriting > kept_horizon * (1 + 1e-12)) {
            ++dropped;
            continue;
        }
        auto z = std::min(static_cast<std::size_t>(e.underwriting / bin_width), r0 - 1);
        // events exactly on the anti-diagonal belong to the last observed delay cell of their row
        auto t = std::min(static_cast<std::size_t>(e.delay / bin_width), r0 - 1 - z);
        tri.at(t, z) += 1;
    }
    if (dropped && warnings)
        warnings->push_back(std::to_string(dropped) + " events in the dropped partial bin were discarded");
    return tri;
}

inline RunoffTriangle reverse_time(const RunoffTriangle& tri) {
    tri.validate();
    RunoffTriangle out(tri.r0, tri.bin_width, !tri.reversed);
    for (std::size_t t = 0; t < tri.r0; ++t)
        for (std::size_t z = 0; z < tri.r0; ++z) out.at(tri.r0 - 1 - t, z) = tri.at(t, z);
    return out;
}

// O[r][z] is the count in reversed cell r; E[r][z] is the number of row-z events with reversed
// time in cell r or later, i.e. still at risk when reversed time enters cell r.
inline OccurrenceExposureGrid build_occurrence_exposure(const RunoffTriangle& tri) {
    const RunoffTriangle rev = tri.reversed ? tri : reverse_time(tri);
    const std::size_t n = rev.r0;
    OccurrenceExposureGrid g(Shape::square(n));
    for (std::size_t z = 0; z < n; ++z) {
        double tail = 0.0;
        for (std::size_t r = n; r-- > 0;) {
            const std::size_t f = g.shape.flat(r, z);
            const bool in = z <= r;
            g.support[f] = in;
            if (!in) continue;
            const double o = static_cast<double>(rev.at(r, z));
            tail += o;
            g.occurrence[f] = o;
            g.exposure[f] = tail;
        }
    }
    return g;
}

// The last reversed cell has E = O in every row (q = 1 by construction) and carries no
// information about the hazard; estimation drops it. Kept when there is only one cell.
inline void drop_closure_cells(OccurrenceExposureGrid& g) {
    const std::size_t last = g.shape.axis(0).n;
    if (last < 2) return;
    for (std::size_t f = 0; f < g.shape.size(); ++f) {
        if (g.shape.coord(f, 0) + 1 != last) continue;
        g.support[f] = 0;
        g.occurrence[f] = 0.0;
        g.exposure[f] = 0.0;
    }
}

}  // namespace sbf
