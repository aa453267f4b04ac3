#pragma once

#include <vector>

#include "mmexit/model_io.hpp"
#include "mmexit/simulator.hpp"

namespace mmexit {

struct AnalyticOptions {
    int n = 512;  // two-boundary grid (raised until x is a node)
};

/// Closed-form counterpart of a Monte Carlo estimand, one matrix per level.
///
/// Same (k, r) convention as `estimate`. Throws ArgumentError for estimands with no
/// analytic counterpart or when a risk estimand is asked of a plain model.
std::vector<RealMatrix> analytic_estimand(const Scenario& sc, const McQuery& query,
                                          const std::vector<double>& levels, const AnalyticOptions& opts = {});

struct ComparisonRow {
    double level = 0.0;
    RealMatrix analytic;
    McEstimate mc;
    /// (analytic - mc) / stderr; 0 where both the gap and the stderr vanish.
    RealMatrix zscore;
};

std::vector<ComparisonRow> compare(const Scenario& sc, const McQuery& query, const std::vector<double>& levels,
                                   const McOptions& mc, const AnalyticOptions& opts = {});

} // namespace mmexit
