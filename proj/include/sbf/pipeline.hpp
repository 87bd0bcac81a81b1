#pragma once

#include <string>
#include <vector>

#include "sbf/backfit.hpp"
#include "sbf/data_model.hpp"
#include "sbf/forecast.hpp"
#include "sbf/kernel.hpp"
#include "sbf/smoothing.hpp"

namespace sbf {

struct PipelineConfig {
    Kernel kernel{};
    Bandwidth bandwidth{1.0, 1.0};
    Smoother smoother = Smoother::local_linear;
    BackfitConfig backfit{};
    DensityOptions density{};
    std::size_t periods = 0;  // 0: one period per cell
    bool keep_closure = false;
};

inline OccurrenceExposureGrid estimation_grid(const RunoffTriangle& tri, bool keep_closure = false) {
    auto g = build_occurrence_exposure(tri);
    if (!keep_closure) drop_closure_cells(g);
    return g;
}

struct PipelineResult {
    OccurrenceExposureGrid grid;
    HazardSurface surface;
    MultiplicativeFit fit;
    ConditionalDensity density;
    ReserveForecast forecast;
};

inline MultiplicativeFit estimate(const OccurrenceExposureGrid& g, const PipelineConfig& cfg, HazardSurface* surface = nullptr) {
    HazardSurface s = smooth(g, cfg.kernel, cfg.bandwidth, cfg.smoother);
    MultiplicativeFit fit = backfit(s, cfg.backfit);
    if (surface) *surface = std::move(s);
    return fit;
}

// Triangle -> occurrence/exposure -> smoothing -> backfitting -> density -> reserve and cash flow.
inline PipelineResult forecast_ph(const RunoffTriangle& tri, const PipelineConfig& cfg) {
    PipelineResult r;
    r.grid = estimation_grid(tri, cfg.keep_closure);
    r.fit = estimate(r.grid, cfg, &r.surface);
    r.density = conditional_density(r.fit, cfg.density);
    const std::size_t periods = cfg.periods ? cfg.periods : tri.r0;
    r.forecast = cash_flow(tri.row_totals(), r.density, periods);
    return r;
}

}  // namespace sbf
