#ifndef COLMERGE_SYSTEM_MODEL_HPP
#define COLMERGE_SYSTEM_MODEL_HPP

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "colmerge/matrix.hpp"

namespace colmerge {

/// Transmission-constrained scheduling instance with box-bounded uncertain
/// nodal injections. All members are immutable by convention after
/// construction; concurrent readers need no coordination.
///
/// Diagnostics and file formats use 1-based unit/load/line/period indices;
/// everything in this API is 0-based.
struct PowerSystem {
    std::size_t num_units = 0;   // I
    std::size_t num_loads = 0;   // M
    std::size_t num_lines = 0;   // L
    std::size_t num_periods = 0; // T

    Matrix ptdf_units; // L x I injection-shift factors for units
    Matrix ptdf_loads; // L x M injection-shift factors for uncertain loads
    std::vector<double> line_limits; // L, MW, > 0

    Matrix load_lower; // M x T, MW
    Matrix load_upper; // M x T, MW

    // Optional (empty when absent). Only the redundancy screen consumes these.
    Matrix unit_cap_lower; // I x T, MW
    Matrix unit_cap_upper; // I x T, MW

    // Opaque budget-constraint metadata carried through verbatim.
    std::string budget_json;

    bool has_unit_caps() const { return !unit_cap_lower.empty() && !unit_cap_upper.empty(); }
};

/// Dispatch levels p, I x T.
struct DispatchSchedule {
    Matrix values;
};

/// Disjoint cover of the load set {0..M-1}. Canonical form: members ascending
/// within each group, groups ordered by smallest member.
struct Partition {
    std::vector<std::vector<std::size_t>> groups;
    std::size_t num_groups() const { return groups.size(); }
};

inline Partition identity_partition(std::size_t num_loads) {
    Partition p;
    p.groups.resize(num_loads);
    for (std::size_t m = 0; m < num_loads; ++m) p.groups[m] = {m};
    return p;
}

inline void canonicalize(Partition& part) {
    for (auto& g : part.groups) std::sort(g.begin(), g.end());
    std::sort(part.groups.begin(), part.groups.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
}

inline std::vector<std::string> validate_partition(const Partition& part, std::size_t num_loads) {
    std::vector<std::string> errs;
    std::vector<int> seen(num_loads, 0);
    for (std::size_t k = 0; k < part.groups.size(); ++k) {
        if (part.groups[k].empty()) {
            errs.push_back("empty group " + std::to_string(k + 1));
            continue;
        }
        for (std::size_t m : part.groups[k]) {
            if (m >= num_loads) {
                errs.push_back("group " + std::to_string(k + 1) + " references load " +
                               std::to_string(m + 1) + " > M=" + std::to_string(num_loads));
            } else if (seen[m]++) {
                errs.push_back("load " + std::to_string(m + 1) + " appears in more than one group");
            }
        }
    }
    for (std::size_t m = 0; m < num_loads; ++m)
        if (!seen[m]) errs.push_back("load " + std::to_string(m + 1) + " not covered by any group");
    return errs;
}

/// Broadcast a single per-load column to all T periods.
inline Matrix broadcast_column(std::span<const double> column, std::size_t num_periods) {
    Matrix out(column.size(), num_periods);
    for (std::size_t m = 0; m < column.size(); ++m)
        for (std::size_t t = 0; t < num_periods; ++t) out(m, t) = column[m];
    return out;
}

/// Structural validation. Returns every violation found; empty means ok.
inline std::vector<std::string> validate_system(const PowerSystem& sys) {
    std::vector<std::string> errs;
    auto dim = [&](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
        if (m.rows() != r || m.cols() != c)
            errs.push_back(std::string("dimension mismatch: ") + name + " is " +
                           std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                           ", expected " + std::to_string(r) + "x" + std::to_string(c));
    };
    dim(sys.ptdf_units, sys.num_lines, sys.num_units, "ptdf_units");
    dim(sys.ptdf_loads, sys.num_lines, sys.num_loads, "ptdf_loads");
    dim(sys.load_lower, sys.num_loads, sys.num_periods, "load_lower");
    dim(sys.load_upper, sys.num_loads, sys.num_periods, "load_upper");
    if (sys.line_limits.size() != sys.num_lines)
        errs.push_back("dimension mismatch: line_limits has " +
                       std::to_string(sys.line_limits.size()) + " entries, expected " +
                       std::to_string(sys.num_lines));

    auto finite = [&](const Matrix& m, const char* name) {
        if (!all_finite(m.data())) errs.push_back(std::string("non-finite entry in ") + name);
    };
    finite(sys.ptdf_units, "ptdf_units");
    finite(sys.ptdf_loads, "ptdf_loads");
    finite(sys.load_lower, "load_lower");
    finite(sys.load_upper, "load_upper");
    if (!all_finite(sys.line_limits)) errs.push_back("non-finite entry in line_limits");

    for (std::size_t l = 0; l < sys.line_limits.size(); ++l)
        if (!(sys.line_limits[l] > 0.0))
            errs.push_back("line limit must be > 0 at line " + std::to_string(l + 1));

    if (sys.load_lower.rows() == sys.load_upper.rows() &&
        sys.load_lower.cols() == sys.load_upper.cols()) {
        for (std::size_t m = 0; m < sys.load_lower.rows(); ++m)
            for (std::size_t t = 0; t < sys.load_lower.cols(); ++t)
                if (sys.load_lower(m, t) > sys.load_upper(m, t))
                    errs.push_back("inverted bound at (" + std::to_string(m + 1) + "," +
                                   std::to_string(t + 1) + "): load_lower " +
                                   std::to_string(sys.load_lower(m, t)) + " > load_upper " +
                                   std::to_string(sys.load_upper(m, t)));
    }

    if (sys.has_unit_caps()) {
        dim(sys.unit_cap_lower, sys.num_units, sys.num_periods, "unit_cap_lower");
        dim(sys.unit_cap_upper, sys.num_units, sys.num_periods, "unit_cap_upper");
        finite(sys.unit_cap_lower, "unit_cap_lower");
        finite(sys.unit_cap_upper, "unit_cap_upper");
        if (sys.unit_cap_lower.rows() == sys.unit_cap_upper.rows() &&
            sys.unit_cap_lower.cols() == sys.unit_cap_upper.cols()) {
            for (std::size_t i = 0; i < sys.unit_cap_lower.rows(); ++i)
                for (std::size_t t = 0; t < sys.unit_cap_lower.cols(); ++t)
                    if (sys.unit_cap_lower(i, t) > sys.unit_cap_upper(i, t))
                        errs.push_back("inverted unit capacity at (" + std::to_string(i + 1) +
                                       "," + std::to_string(t + 1) + ")");
        }
    }
    return errs;
}

/// Sum an M x T scenario over each group: row k of the result is the group-k
/// total per period. Pure summation, no bounds involved.
inline Matrix aggregate_scenario(const Matrix& d, const Partition& part) {
    std::size_t covered = 0;
    for (const auto& g : part.groups) covered += g.size();
    if (covered != d.rows())
        throw std::invalid_argument("aggregate_scenario: partition covers " +
                                    std::to_string(covered) + " loads, scenario has " +
                                    std::to_string(d.rows()) + " rows");
    Matrix out(part.num_groups(), d.cols());
    for (std::size_t k = 0; k < part.num_groups(); ++k) {
        for (std::size_t m : part.groups[k]) {
            if (m >= d.rows())
                throw std::invalid_argument("aggregate_scenario: group member out of range");
            for (std::size_t t = 0; t < d.cols(); ++t) out(k, t) += d(m, t);
        }
    }
    return out;
}

/// True for loads whose bounds do not change over the horizon.
inline std::vector<std::uint8_t> time_invariant_loads(const PowerSystem& sys) {
    std::vector<std::uint8_t> inv(sys.num_loads, 1);
    for (std::size_t m = 0; m < sys.num_loads; ++m)
        for (std::size_t t = 1; t < sys.num_periods; ++t)
            if (sys.load_lower(m, t) != sys.load_lower(m, 0) ||
                sys.load_upper(m, t) != sys.load_upper(m, 0)) {
                inv[m] = 0;
                break;
            }
    return inv;
}

} // namespace colmerge

#endif // COLMERGE_SYSTEM_MODEL_HPP
