#ifndef COLMERGE_UNIFORM_APPROX_HPP
#define COLMERGE_UNIFORM_APPROX_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "colmerge/matrix.hpp"

namespace colmerge {

/// Best uniform affine approximation of sum_j coeffs_j * d_j by
/// alpha0 * (sum_j d_j) + beta0 over a box, with worst-case error eps.
/// For solve_uniform_approx, beta0 refers to the zero-lower-bound box;
/// for solve_box_approx it is already composed for the original box.
struct ApproxResult {
    double alpha0 = 0.0;
    double beta0 = 0.0;
    double eps = 0.0;
};

/// One weighted-sum-over-a-box instance.
struct BoxInstance {
    std::vector<double> coeffs;
    std::vector<double> lower;
    std::vector<double> upper;
    std::size_t size() const { return coeffs.size(); }
};

inline void validate_box(const BoxInstance& inst) {
    const std::size_t n = inst.size();
    if (n == 0) throw std::invalid_argument("box instance is empty");
    if (inst.lower.size() != n || inst.upper.size() != n)
        throw std::invalid_argument("box instance: mismatched vector lengths");
    if (!all_finite(inst.coeffs) || !all_finite(inst.lower) || !all_finite(inst.upper))
        throw std::invalid_argument("box instance: non-finite entry");
    for (std::size_t j = 0; j < n; ++j)
        if (inst.lower[j] > inst.upper[j])
            throw std::invalid_argument("box instance: lower > upper at coordinate " +
                                        std::to_string(j + 1));
}

/// Result of shifting a box so every lower bound becomes zero. The final
/// offset depends on the (still unknown) slope, so the shift returns the two
/// sums needed to compose it afterwards:
///   beta_final = beta0 + coeff_dot_lower - alpha0 * lower_sum.
struct ShiftedBox {
    std::vector<double> widths;
    double coeff_dot_lower = 0.0;
    double lower_sum = 0.0;
};

inline ShiftedBox shift_to_zero_lower(const BoxInstance& inst) {
    validate_box(inst);
    ShiftedBox s;
    s.widths.resize(inst.size());
    for (std::size_t j = 0; j < inst.size(); ++j) {
        s.widths[j] = inst.upper[j] - inst.lower[j];
        s.coeff_dot_lower += inst.coeffs[j] * inst.lower[j];
        s.lower_sum += inst.lower[j];
    }
    return s;
}

/// Reusable workspace for solve_uniform_approx in hot loops.
struct ApproxScratch {
    std::vector<std::uint32_t> order;
};

/// Closed-form solution of
///   min_{a0,b0} max_{0 <= x <= widths} | sum_j coeffs_j x_j - a0 sum_j x_j - b0 |.
///
/// Coefficients are scanned in ascending order; the slope is the coefficient
/// at the sign change of the running width balance
///   lambda_j = sum_{i<j} w_i - sum_{i>=j} w_j,
/// taking the smallest such index (equal-coefficient ties keep input order).
/// The offset centers the error band and eps = 0.5 * sum_j |c_j - a0| w_j.
inline ApproxResult solve_uniform_approx(std::span<const double> coeffs,
                                         std::span<const double> widths,
                                         ApproxScratch* scratch = nullptr) {
    const std::size_t n = coeffs.size();
    if (n == 0) throw std::invalid_argument("solve_uniform_approx: empty instance");
    if (widths.size() != n)
        throw std::invalid_argument("solve_uniform_approx: coeffs/widths length mismatch");
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(coeffs[j]) || !std::isfinite(widths[j]))
            throw std::invalid_argument("solve_uniform_approx: non-finite input");
        if (widths[j] < 0.0)
            throw std::invalid_argument("solve_uniform_approx: negative width");
        total += widths[j];
    }

    ApproxScratch local;
    ApproxScratch& s = scratch ? *scratch : local;
    s.order.resize(n);
    std::iota(s.order.begin(), s.order.end(), 0u);
    std::sort(s.order.begin(), s.order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return coeffs[a] < coeffs[b] || (coeffs[a] == coeffs[b] && a < b);
    });

    // lambda_1 = -total <= 0 and the sequence is nondecreasing, so the scan
    // always finds a crossing; the last index absorbs rounding residue.
    double lambda = -total;
    std::size_t jstar = n - 1;
    for (std::size_t j = 0; j < n; ++j) {
        const double next = lambda + 2.0 * widths[s.order[j]];
        if (lambda <= 0.0 && next >= 0.0) {
            jstar = j;
            break;
        }
        lambda = next;
    }

    ApproxResult r;
    r.alpha0 = coeffs[s.order[jstar]];
    double half_sum = 0.0, half_abs = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double dev = (coeffs[s.order[j]] - r.alpha0) * widths[s.order[j]];
        half_sum += dev;
        half_abs += std::abs(dev);
    }
    r.beta0 = 0.5 * half_sum;
    r.eps = 0.5 * half_abs;
    return r;
}

/// General-bounds entry point: shift, solve, and compose the offset back to
/// the original box. The returned beta0 is final for the unshifted box.
inline ApproxResult solve_box_approx(const BoxInstance& inst, ApproxScratch* scratch = nullptr) {
    const ShiftedBox s = shift_to_zero_lower(inst);
    ApproxResult r = solve_uniform_approx(inst.coeffs, s.widths, scratch);
    r.beta0 = r.beta0 + s.coeff_dot_lower - r.alpha0 * s.lower_sum;
    return r;
}

struct PhiRange {
    double phi_max = 0.0;
    double phi_min = 0.0;
};

/// Extremes of sum_j (coeffs_j - alpha0) x_j over the box [0, widths]:
/// positive slopes saturate at the width, negative ones at zero.
inline PhiRange eval_phi_range(std::span<const double> coeffs, std::span<const double> widths,
                               double alpha0) {
    if (coeffs.size() != widths.size())
        throw std::invalid_argument("eval_phi_range: length mismatch");
    if (!std::isfinite(alpha0)) throw std::invalid_argument("eval_phi_range: non-finite alpha0");
    PhiRange out;
    for (std::size_t j = 0; j < coeffs.size(); ++j) {
        if (!std::isfinite(coeffs[j]) || !std::isfinite(widths[j]))
            throw std::invalid_argument("eval_phi_range: non-finite input");
        const double slope = coeffs[j] - alpha0;
        if (slope > 0.0)
            out.phi_max += slope * widths[j];
        else
            out.phi_min += slope * widths[j];
    }
    return out;
}

/// Grid-search oracle for the minimax problem. Enumerates all 2^n box
/// vertices explicitly per grid point; shares no code with the closed form
/// or with eval_phi_range. The offset is implicitly the band midpoint, so
/// each grid point contributes 0.5 * (phi_max - phi_min).
inline double brute_force_minimax(std::span<const double> coeffs,
                                  std::span<const double> widths, std::size_t grid_steps) {
    const std::size_t n = coeffs.size();
    if (n == 0) throw std::invalid_argument("brute_force_minimax: empty instance");
    if (n > 20) throw std::invalid_argument("brute_force_minimax: n too large for enumeration");
    if (grid_steps < 100) throw std::invalid_argument("brute_force_minimax: grid too coarse");
    if (widths.size() != n) throw std::invalid_argument("brute_force_minimax: length mismatch");

    double lo = coeffs[0], hi = coeffs[0];
    for (double c : coeffs) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    lo -= 1.0;
    hi += 1.0;

    // Per-vertex sums so each grid point costs two flops per vertex.
    const std::size_t nv = std::size_t{1} << n;
    std::vector<double> vert_cw(nv, 0.0), vert_w(nv, 0.0);
    for (std::size_t mask = 0; mask < nv; ++mask) {
        for (std::size_t j = 0; j < n; ++j) {
            if (mask & (std::size_t{1} << j)) {
                vert_cw[mask] += coeffs[j] * widths[j];
                vert_w[mask] += widths[j];
            }
        }
    }

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid_steps; ++g) {
        const double a0 = lo + (hi - lo) * static_cast<double>(g) /
                                   static_cast<double>(grid_steps - 1);
        double pmax = -std::numeric_limits<double>::infinity();
        double pmin = std::numeric_limits<double>::infinity();
        for (std::size_t mask = 0; mask < nv; ++mask) {
            const double phi = vert_cw[mask] - a0 * vert_w[mask];
            pmax = std::max(pmax, phi);
            pmin = std::min(pmin, phi);
        }
        best = std::min(best, 0.5 * (pmax - pmin));
    }
    return best;
}

/// Exact worst residual |sum c_j d_j - alpha0 sum d_j - beta0| over the
/// original (unshifted) box. The residual is affine in d, so the maximum over
/// the box is attained at a vertex; all 2^n vertices are enumerated.
inline double max_residual_at_vertices(const BoxInstance& inst, const ApproxResult& result) {
    validate_box(inst);
    const std::size_t n = inst.size();
    if (n > 20)
        throw std::invalid_argument("max_residual_at_vertices: n too large for enumeration");
    const std::size_t nv = std::size_t{1} << n;
    double worst = 0.0;
    for (std::size_t mask = 0; mask < nv; ++mask) {
        double weighted = 0.0, plain = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = (mask & (std::size_t{1} << j)) ? inst.upper[j] : inst.lower[j];
            weighted += inst.coeffs[j] * d;
            plain += d;
        }
        worst = std::max(worst, std::abs(weighted - result.alpha0 * plain - result.beta0));
    }
    return worst;
}

} // namespace colmerge

#endif // COLMERGE_UNIFORM_APPROX_HPP
