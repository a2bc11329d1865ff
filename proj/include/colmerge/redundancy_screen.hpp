#ifndef COLMERGE_REDUNDANCY_SCREEN_HPP
#define COLMERGE_REDUNDANCY_SCREEN_HPP

#include <cstdint>
#include <vector>

#include "colmerge/system_model.hpp"

namespace colmerge {

/// Outcome of the conservative transmission-constraint pre-filter.
/// A marked constraint can never be violated for any dispatch within unit
/// capacities (including off units) and any load in the box; the test is
/// sufficient only, so bindable constraints are never marked but some truly
/// redundant ones may be kept.
struct ScreenResult {
    bool screened = false; // false when unit capacities were absent
    std::size_t num_lines = 0;
    std::size_t num_periods = 0;
    std::vector<std::uint8_t> redundant_upper; // L*T flags, index l*T + t
    std::vector<std::uint8_t> redundant_lower; // L*T flags
    std::vector<std::size_t> fully_inactive_lines;

    bool upper_redundant(std::size_t l, std::size_t t) const {
        return screened && redundant_upper[l * num_periods + t] != 0;
    }
    bool lower_redundant(std::size_t l, std::size_t t) const {
        return screened && redundant_lower[l * num_periods + t] != 0;
    }
    std::size_t total_constraints() const { return 2 * num_lines * num_periods; }
    std::size_t redundant_count() const {
        std::size_t n = 0;
        for (auto f : redundant_upper) n += f;
        for (auto f : redundant_lower) n += f;
        return n;
    }
};

/// Interval-arithmetic screen over p in {0} union [cap_lower, cap_upper]
/// and d in the load box. Requires unit capacities; returns an unscreened
/// result otherwise.
inline ScreenResult screen_redundant(const PowerSystem& sys) {
    ScreenResult res;
    res.num_lines = sys.num_lines;
    res.num_periods = sys.num_periods;
    if (!sys.has_unit_caps()) return res;

    res.screened = true;
    res.redundant_upper.assign(sys.num_lines * sys.num_periods, 0);
    res.redundant_lower.assign(sys.num_lines * sys.num_periods, 0);

    for (std::size_t l = 0; l < sys.num_lines; ++l) {
        bool all_redundant = true;
        for (std::size_t t = 0; t < sys.num_periods; ++t) {
            double sup_flow = 0.0, inf_flow = 0.0;
            for (std::size_t i = 0; i < sys.num_units; ++i) {
                const double g = sys.ptdf_units(l, i);
                const double a = g * sys.unit_cap_lower(i, t);
                const double b = g * sys.unit_cap_upper(i, t);
                // 0 in each interval: the unit may be off.
                sup_flow += std::max({a, b, 0.0});
                inf_flow += std::min({a, b, 0.0});
            }
            for (std::size_t m = 0; m < sys.num_loads; ++m) {
                const double g = sys.ptdf_loads(l, m);
                const double a = g * sys.load_lower(m, t);
                const double b = g * sys.load_upper(m, t);
                sup_flow -= std::min(a, b);
                inf_flow -= std::max(a, b);
            }
            const bool up = sup_flow <= sys.line_limits[l];
            const bool lo = inf_flow >= -sys.line_limits[l];
            res.redundant_upper[l * sys.num_periods + t] = up;
            res.redundant_lower[l * sys.num_periods + t] = lo;
            if (!up || !lo) all_redundant = false;
        }
        if (all_redundant) res.fully_inactive_lines.push_back(l);
    }
    return res;
}

/// Lines the merge engine must still protect: everything except fully
/// inactive ones. All lines when the screen did not run.
inline std::vector<std::size_t> active_lines_after_screen(const ScreenResult& res,
                                                          std::size_t num_lines) {
    std::vector<std::size_t> active;
    std::size_t next_inactive = 0;
    for (std::size_t l = 0; l < num_lines; ++l) {
        if (res.screened && next_inactive < res.fully_inactive_lines.size() &&
            res.fully_inactive_lines[next_inactive] == l) {
            ++next_inactive;
            continue;
        }
        active.push_back(l);
    }
    return active;
}

} // namespace colmerge

#endif // COLMERGE_REDUNDANCY_SCREEN_HPP
