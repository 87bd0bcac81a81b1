#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>

namespace sbf {

enum class KernelName { epanechnikov, quartic, uniform };

struct Kernel {
    KernelName name = KernelName::epanechnikov;

    double operator()(double u) const {
        if (u < -1.0 || u > 1.0) return 0.0;
        const double v = 1.0 - u * u;
        switch (name) {
            case KernelName::epanechnikov: return 0.75 * v;
            case KernelName::quartic: return 15.0 / 16.0 * v * v;
            case KernelName::uniform: return 0.5;
        }
        return 0.0;
    }

    // Integral of k from -1 to u.
    double cdf(double u) const {
        u = std::clamp(u, -1.0, 1.0);
        const double u3 = u * u * u;
        switch (name) {
            case KernelName::epanechnikov: return 0.5 + 0.75 * (u - u3 / 3.0);
            case KernelName::quartic: return 0.5 + 15.0 / 16.0 * (u - 2.0 * u3 / 3.0 + u3 * u * u / 5.0);
            case KernelName::uniform: return 0.5 * (u + 1.0);
        }
        return 0.0;
    }

    // Mass of K_b(x - u) for u in [lo, hi].
    double mass(double x, double lo, double hi, double b) const { return cdf((x - lo) / b) - cdf((x - hi) / b); }

    std::string str() const {
        switch (name) {
            case KernelName::epanechnikov: return "epanechnikov";
            case KernelName::quartic: return "quartic";
            case KernelName::uniform: return "uniform";
        }
        return "?";
    }
};

inline Kernel parse_kernel(const std::string& s) {
    if (s == "epanechnikov") return {KernelName::epanechnikov};
    if (s == "quartic" || s == "biweight") return {KernelName::quartic};
    if (s == "uniform") return {KernelName::uniform};
    throw std::invalid_argument("unknown kernel '" + s + "'");
}

}  // namespace sbf
