#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace sbf {

// One axis of a regular grid. Cell i covers [origin + i*width, origin + (i+1)*width).
struct Axis {
    std::size_t n = 0;
    double width = 1.0;
    double origin = 0.0;

    double lo(std::size_t i) const { return origin + static_cast<double>(i) * width; }
    double hi(std::size_t i) const { return lo(i) + width; }
    double center(std::size_t i) const { return lo(i) + 0.5 * width; }
    double length() const { return static_cast<double>(n) * width; }
};

// Dense row-major layout; the last axis varies fastest.
class Shape {
public:
    Shape() = default;
    explicit Shape(std::vector<Axis> axes) : axes_(std::move(axes)) {
        if (axes_.empty()) throw std::invalid_argument("shape needs at least one axis");
        strides_.assign(axes_.size(), 1);
        for (std::size_t k = axes_.size() - 1; k > 0; --k)
            strides_[k - 1] = strides_[k] * axes_[k].n;
        size_ = strides_[0] * axes_[0].n;
    }

    static Shape square(std::size_t n, std::size_t rank = 2, double width = 1.0) {
        return Shape(std::vector<Axis>(rank, Axis{n, width, 0.0}));
    }

    std::size_t rank() const { return axes_.size(); }
    std::size_t size() const { return size_; }
    const Axis& axis(std::size_t k) const { return axes_[k]; }
    const std::vector<Axis>& axes() const { return axes_; }
    std::size_t stride(std::size_t k) const { return strides_[k]; }

    double cell_volume() const {
        double v = 1.0;
        for (const auto& a : axes_) v *= a.width;
        return v;
    }

    std::size_t flat(const std::vector<std::size_t>& idx) const {
        std::size_t f = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) f += idx[k] * strides_[k];
        return f;
    }
    std::size_t flat(std::size_t i, std::size_t j) const { return i * strides_[0] + j * strides_[1]; }

    std::size_t coord(std::size_t flat_index, std::size_t k) const {
        return (flat_index / strides_[k]) % axes_[k].n;
    }
    std::vector<std::size_t> unravel(std::size_t flat_index) const {
        std::vector<std::size_t> idx(rank());
        for (std::size_t k = 0; k < rank(); ++k) idx[k] = coord(flat_index, k);
        return idx;
    }

    bool operator==(const Shape& o) const {
        if (rank() != o.rank()) return false;
        for (std::size_t k = 0; k < rank(); ++k)
            if (axes_[k].n != o.axes_[k].n || axes_[k].width != o.axes_[k].width ||
                axes_[k].origin != o.axes_[k].origin)
                return false;
        return true;
    }

private:
    std::vector<Axis> axes_;
    std::vector<std::size_t> strides_;
    std::size_t size_ = 0;
};

using Mask = std::vector<char>;

// Riemann marginal along axis k: sum over the other axes of values * (volume of the other axes).
inline std::vector<double> marginal(const Shape& s, const std::vector<double>& values, const Mask& mask,
                                    std::size_t k) {
    std::vector<double> m(s.axis(k).n, 0.0);
    const double dv = s.cell_volume() / s.axis(k).width;
    for (std::size_t f = 0; f < s.size(); ++f)
        if (mask.empty() || mask[f]) m[s.coord(f, k)] += values[f] * dv;
    return m;
}

inline double integrate(const Shape& s, const std::vector<double>& values, const Mask& mask) {
    double acc = 0.0;
    for (std::size_t f = 0; f < s.size(); ++f)
        if (mask.empty() || mask[f]) acc += values[f];
    return acc * s.cell_volume();
}

}  // namespace sbf
