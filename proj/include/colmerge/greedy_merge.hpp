#ifndef COLMERGE_GREEDY_MERGE_HPP
#define COLMERGE_GREEDY_MERGE_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "colmerge/system_model.hpp"
#include "colmerge/uniform_approx.hpp"

namespace colmerge {

/// Per-(line, group, period) affine surrogate parameters for a partition.
/// Rows for lines outside active_lines hold exact coefficients where the
/// group is exactly representable (all member factors equal) and zeros
/// otherwise; such lines are pass-through, not protected by the merge.
struct ApproxParams {
    std::size_t num_lines = 0;
    std::size_t num_groups = 0;
    std::size_t num_periods = 0;
    std::vector<std::size_t> active_lines; // ascending
    Tensor3 alpha; // L x K x T slopes
    Tensor3 beta;  // L x K x T offsets (final, for the unshifted box)
    Tensor3 eps;   // L x K x T worst-case errors, >= 0
};

struct MergeConfig {
    std::size_t k_req = 1;
    double e_req = std::numeric_limits<double>::infinity();
    // Compare the accumulated error against e_req as a fraction of each line
    // limit (default) or as absolute MW.
    bool relative_threshold = true;
    std::vector<std::size_t> active_lines; // empty selects all lines
};

enum class StopReason { reached_k_req, error_budget };

struct MergeStep {
    std::size_t k_after = 0;
    std::vector<std::size_t> merged_members; // union group, ascending, 0-based
    double max_delta = 0.0;                  // relative fractions, always
    double avg_delta = 0.0;
    Partition partition; // canonical snapshot after the commit
};

struct MergeTrace {
    std::vector<MergeStep> steps;
    StopReason stop_reason = StopReason::reached_k_req;
    std::uint64_t pair_evaluations = 0; // group-pair error computations
    std::uint64_t rounds = 0;           // selection rounds, incl. a rolled-back one
};

struct MergeResult {
    Partition partition;
    ApproxParams params;
    MergeTrace trace;
};

namespace detail {

inline void fill_group_box(const PowerSystem& sys, std::span<const std::size_t> members,
                           std::size_t line, std::size_t period, BoxInstance& box) {
    const std::size_t n = members.size();
    box.coeffs.resize(n);
    box.lower.resize(n);
    box.upper.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t m = members[j];
        box.coeffs[j] = sys.ptdf_loads(line, m);
        box.lower[j] = sys.load_lower(m, period);
        box.upper[j] = sys.load_upper(m, period);
    }
}

inline std::vector<std::size_t> merge_sorted(std::span<const std::size_t> a,
                                             std::span<const std::size_t> b) {
    std::vector<std::size_t> out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

} // namespace detail

/// Approximation error of merging two groups into one, solved from scratch on
/// the union (errors do not add up across sub-groups). Returns one eps per
/// (active line, period): row r of the result is active_lines[r].
inline Matrix pair_merge_error(const PowerSystem& sys, const Partition& part, std::size_t j1,
                               std::size_t j2, std::span<const std::size_t> active_lines) {
    if (j1 >= part.num_groups() || j2 >= part.num_groups() || j1 == j2)
        throw std::invalid_argument("pair_merge_error: invalid group indices");
    const auto members = detail::merge_sorted(part.groups[j1], part.groups[j2]);
    Matrix out(active_lines.size(), sys.num_periods);
    BoxInstance box;
    ApproxScratch scratch;
    std::vector<double> widths(members.size());
    for (std::size_t r = 0; r < active_lines.size(); ++r) {
        for (std::size_t t = 0; t < sys.num_periods; ++t) {
            detail::fill_group_box(sys, members, active_lines[r], t, box);
            for (std::size_t j = 0; j < members.size(); ++j)
                widths[j] = box.upper[j] - box.lower[j];
            out(r, t) = solve_uniform_approx(box.coeffs, widths, &scratch).eps;
        }
    }
    return out;
}

/// Cache of pair-merge error columns keyed by unordered group-id pairs.
/// Columns for a pair of time-invariant groups are stored once and
/// replicated over periods on expansion. Entries are pure functions of the
/// system and the two member sets, so distinct keys may be filled
/// concurrently; reads happen only after the fill completes.
class PairErrorCache {
public:
    struct Entry {
        std::size_t periods_stored = 0; // 1 when time-invariant, else T
        std::vector<double> eps;        // active_count x periods_stored, row-major
        double metric = 0.0;            // max over all (line, period)
    };

    static std::uint64_t key(std::uint32_t a, std::uint32_t b) {
        if (a > b) std::swap(a, b);
        return (std::uint64_t{a} << 32) | b;
    }

    bool contains(std::uint64_t k) const { return map_.find(k) != map_.end(); }
    const Entry& at(std::uint64_t k) const { return map_.at(k); }
    void insert(std::uint64_t k, Entry e) { map_.emplace(k, std::move(e)); }
    void erase_if_involves(std::uint32_t id) {
        for (auto it = map_.begin(); it != map_.end();) {
            const std::uint32_t a = static_cast<std::uint32_t>(it->first >> 32);
            const std::uint32_t b = static_cast<std::uint32_t>(it->first & 0xffffffffu);
            it = (a == id || b == id) ? map_.erase(it) : std::next(it);
        }
    }
    std::size_t size() const { return map_.size(); }

    /// eps at dense (active-line row, period) for a possibly compressed entry.
    static double eps_at(const Entry& e, std::size_t row, std::size_t t) {
        return e.eps[row * e.periods_stored + (e.periods_stored == 1 ? 0 : t)];
    }

private:
    std::unordered_map<std::uint64_t, Entry> map_;
};

/// Pair with the smallest worst-line/worst-period merge error; ties resolve
/// to the lexicographically smallest index pair in canonical group order.
/// `group_ids` lists live group ids in canonical order; the return value is a
/// position pair into that list.
inline std::pair<std::size_t, std::size_t> select_best_pair(
    const PairErrorCache& cache, std::span<const std::uint32_t> group_ids) {
    if (group_ids.size() < 2)
        throw std::invalid_argument("select_best_pair: fewer than 2 groups");
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::size_t> pick{0, 1};
    for (std::size_t i = 0; i + 1 < group_ids.size(); ++i) {
        for (std::size_t j = i + 1; j < group_ids.size(); ++j) {
            const double m = cache.at(PairErrorCache::key(group_ids[i], group_ids[j])).metric;
            if (m < best) {
                best = m;
                pick = {i, j};
            }
        }
    }
    return pick;
}

/// Full surrogate parameters for a committed partition. Active lines get the
/// minimax solution per (group, period); inactive lines get exact
/// coefficients where representable and zeros otherwise (eps stays 0 either
/// way, leaving their limits untightened).
inline ApproxParams compute_group_params(const PowerSystem& sys, const Partition& part,
                                         std::span<const std::size_t> active_lines) {
    const std::size_t K = part.num_groups();
    ApproxParams p;
    p.num_lines = sys.num_lines;
    p.num_groups = K;
    p.num_periods = sys.num_periods;
    p.active_lines.assign(active_lines.begin(), active_lines.end());
    p.alpha = Tensor3(sys.num_lines, K, sys.num_periods);
    p.beta = Tensor3(sys.num_lines, K, sys.num_periods);
    p.eps = Tensor3(sys.num_lines, K, sys.num_periods);

    std::vector<std::uint8_t> is_active(sys.num_lines, 0);
    for (std::size_t l : active_lines) is_active.at(l) = 1;
    const auto load_inv = time_invariant_loads(sys);

    BoxInstance box;
    ApproxScratch scratch;
    for (std::size_t k = 0; k < K; ++k) {
        const auto& members = part.groups[k];
        bool invariant = true;
        for (std::size_t m : members) invariant = invariant && load_inv[m];
        for (std::size_t l = 0; l < sys.num_lines; ++l) {
            if (is_active[l]) {
                const std::size_t t_span = invariant ? 1 : sys.num_periods;
                for (std::size_t t = 0; t < t_span; ++t) {
                    detail::fill_group_box(sys, members, l, t, box);
                    const ApproxResult r = solve_box_approx(box, &scratch);
                    p.alpha(l, k, t) = r.alpha0;
                    p.beta(l, k, t) = r.beta0;
                    p.eps(l, k, t) = r.eps;
                }
                for (std::size_t t = t_span; t < sys.num_periods; ++t) {
                    p.alpha(l, k, t) = p.alpha(l, k, 0);
                    p.beta(l, k, t) = p.beta(l, k, 0);
                    p.eps(l, k, t) = p.eps(l, k, 0);
                }
            } else {
                const double c0 = sys.ptdf_loads(l, members.front());
                bool exact = true;
                for (std::size_t m : members) exact = exact && sys.ptdf_loads(l, m) == c0;
                const double a = exact ? c0 : 0.0;
                for (std::size_t t = 0; t < sys.num_periods; ++t) p.alpha(l, k, t) = a;
            }
        }
    }
    return p;
}

/// Greedy agglomeration driver. Each round fills the pair cache (first round
/// all pairs, later rounds only pairs with the newest group), selects the
/// cheapest pair, and commits unless the accumulated error would reach the
/// budget, in which case the tentative merge is discarded and the run stops.
class MergeEngine {
public:
    MergeEngine(const PowerSystem& sys, MergeConfig cfg) : sys_(sys), cfg_(std::move(cfg)) {
        if (cfg_.k_req < 1) throw std::invalid_argument("merge config: k_req must be >= 1");
        if (!(cfg_.e_req > 0.0)) throw std::invalid_argument("merge config: e_req must be > 0");
        if (cfg_.active_lines.empty()) {
            cfg_.active_lines.resize(sys.num_lines);
            std::iota(cfg_.active_lines.begin(), cfg_.active_lines.end(), std::size_t{0});
        } else {
            std::sort(cfg_.active_lines.begin(), cfg_.active_lines.end());
            cfg_.active_lines.erase(
                std::unique(cfg_.active_lines.begin(), cfg_.active_lines.end()),
                cfg_.active_lines.end());
            if (cfg_.active_lines.back() >= sys.num_lines)
                throw std::invalid_argument("merge config: active line out of range");
        }

        sum_eps_.assign(col_size(), 0.0);
        const auto load_inv = time_invariant_loads(sys);
        groups_.reserve(sys.num_loads);
        for (std::size_t m = 0; m < sys.num_loads; ++m) {
            Group g;
            g.id = next_id_++;
            g.members = {m};
            g.time_invariant = load_inv[m] != 0;
            g.eps_col.assign(col_size(), 0.0);
            groups_.push_back(std::move(g));
        }
    }

    /// One greedy round. Returns true when a merge was committed; false when
    /// the run stopped (k_req reached or budget hit).
    bool step() {
        if (stopped_) return false;
        if (groups_.size() <= cfg_.k_req) {
            stopped_ = true;
            reason_ = StopReason::reached_k_req;
            return false;
        }
        ++rounds_;
        fill_cache();
        const auto [i, j] = select_best_pair(cache_, live_ids());
        const auto& entry = cache_.at(PairErrorCache::key(groups_[i].id, groups_[j].id));

        // Tentative accumulated error with the union replacing both parts.
        double check = 0.0;
        const std::size_t T = sys_.num_periods;
        for (std::size_t r = 0; r < cfg_.active_lines.size(); ++r) {
            const double limit = sys_.line_limits[cfg_.active_lines[r]];
            for (std::size_t t = 0; t < T; ++t) {
                double s = sum_eps_[r * T + t] - groups_[i].eps_col[r * T + t] -
                           groups_[j].eps_col[r * T + t] + PairErrorCache::eps_at(entry, r, t);
                if (cfg_.relative_threshold) s /= limit;
                check = std::max(check, s);
            }
        }
        if (check >= cfg_.e_req) {
            stopped_ = true;
            reason_ = StopReason::error_budget;
            return false;
        }

        commit(i, j, entry);
        return true;
    }

    bool finished() const { return stopped_; }
    StopReason stop_reason() const { return reason_; }
    std::uint64_t pair_evaluations() const { return pair_evaluations_; }
    std::uint64_t rounds() const { return rounds_; }
    const PairErrorCache& cache() const { return cache_; }
    const std::vector<MergeStep>& steps() const { return steps_; }
    std::span<const std::size_t> active_lines() const { return cfg_.active_lines; }

    Partition partition() const {
        Partition p;
        p.groups.reserve(groups_.size());
        for (const auto& g : groups_) p.groups.push_back(g.members);
        return p; // groups are kept in canonical order throughout
    }

    std::vector<std::uint32_t> live_ids() const {
        std::vector<std::uint32_t> ids;
        ids.reserve(groups_.size());
        for (const auto& g : groups_) ids.push_back(g.id);
        return ids;
    }

    /// Accumulated per-(active line row, period) error of the current
    /// partition, summed in canonical group order.
    const std::vector<double>& accumulated_eps() const { return sum_eps_; }

    std::pair<double, double> delta_metrics() const {
        const std::size_t T = sys_.num_periods;
        double max_d = 0.0, sum_line_max = 0.0;
        for (std::size_t r = 0; r < cfg_.active_lines.size(); ++r) {
            double line_max = 0.0;
            for (std::size_t t = 0; t < T; ++t)
                line_max = std::max(line_max, sum_eps_[r * T + t]);
            line_max /= sys_.line_limits[cfg_.active_lines[r]];
            max_d = std::max(max_d, line_max);
            sum_line_max += line_max;
        }
        return {max_d, sum_line_max / static_cast<double>(cfg_.active_lines.size())};
    }

private:
    struct Group {
        std::uint32_t id = 0;
        std::vector<std::size_t> members;
        bool time_invariant = false;
        std::vector<double> eps_col; // active_count x T dense
    };

    std::size_t col_size() const { return cfg_.active_lines.size() * sys_.num_periods; }

    void fill_cache() {
        BoxInstance box;
        ApproxScratch scratch;
        std::vector<double> widths;
        for (std::size_t i = 0; i + 1 < groups_.size(); ++i) {
            for (std::size_t j = i + 1; j < groups_.size(); ++j) {
                const std::uint64_t k = PairErrorCache::key(groups_[i].id, groups_[j].id);
                if (cache_.contains(k)) continue;
                cache_.insert(k, compute_pair_entry(groups_[i], groups_[j], box, scratch, widths));
                ++pair_evaluations_;
            }
        }
    }

    PairErrorCache::Entry compute_pair_entry(const Group& a, const Group& b, BoxInstance& box,
                                             ApproxScratch& scratch,
                                             std::vector<double>& widths) const {
        const auto members = detail::merge_sorted(a.members, b.members);
        PairErrorCache::Entry e;
        e.periods_stored = (a.time_invariant && b.time_invariant) ? 1 : sys_.num_periods;
        e.eps.resize(cfg_.active_lines.size() * e.periods_stored);
        widths.resize(members.size());
        for (std::size_t r = 0; r < cfg_.active_lines.size(); ++r) {
            for (std::size_t t = 0; t < e.periods_stored; ++t) {
                detail::fill_group_box(sys_, members, cfg_.active_lines[r], t, box);
                for (std::size_t j = 0; j < members.size(); ++j)
                    widths[j] = box.upper[j] - box.lower[j];
                const double eps = solve_uniform_approx(box.coeffs, widths, &scratch).eps;
                e.eps[r * e.periods_stored + t] = eps;
                e.metric = std::max(e.metric, eps);
            }
        }
        return e;
    }

    void commit(std::size_t i, std::size_t j, const PairErrorCache::Entry& entry) {
        const std::size_t T = sys_.num_periods;
        Group merged;
        merged.id = next_id_++;
        merged.members = detail::merge_sorted(groups_[i].members, groups_[j].members);
        merged.time_invariant = groups_[i].time_invariant && groups_[j].time_invariant;
        merged.eps_col.resize(col_size());
        for (std::size_t r = 0; r < cfg_.active_lines.size(); ++r)
            for (std::size_t t = 0; t < T; ++t)
                merged.eps_col[r * T + t] = PairErrorCache::eps_at(entry, r, t);

        cache_.erase_if_involves(groups_[i].id);
        cache_.erase_if_involves(groups_[j].id);
        groups_.erase(groups_.begin() + j); // j > i
        groups_.erase(groups_.begin() + i);
        const auto pos = std::lower_bound(
            groups_.begin(), groups_.end(), merged,
            [](const Group& a, const Group& b) { return a.members.front() < b.members.front(); });
        const auto union_members = merged.members;
        groups_.insert(pos, std::move(merged));

        // Re-sum from group columns in canonical order.
        sum_eps_.assign(col_size(), 0.0);
        for (const auto& g : groups_)
            for (std::size_t x = 0; x < g.eps_col.size(); ++x) sum_eps_[x] += g.eps_col[x];

        const auto [max_d, avg_d] = delta_metrics();
        MergeStep step;
        step.k_after = groups_.size();
        step.merged_members = union_members;
        step.max_delta = max_d;
        step.avg_delta = avg_d;
        step.partition = partition();
        steps_.push_back(std::move(step));
    }

    const PowerSystem& sys_;
    MergeConfig cfg_;
    std::vector<Group> groups_; // canonical order: ascending first member
    PairErrorCache cache_;
    std::vector<double> sum_eps_;
    std::vector<MergeStep> steps_;
    std::uint32_t next_id_ = 0;
    std::uint64_t pair_evaluations_ = 0;
    std::uint64_t rounds_ = 0;
    bool stopped_ = false;
    StopReason reason_ = StopReason::reached_k_req;
};

/// Run the greedy merge to completion and compute final surrogate parameters
/// for the committed partition. Deterministic for fixed inputs.
inline MergeResult greedy_merge(const PowerSystem& sys, const MergeConfig& cfg) {
    MergeEngine engine(sys, cfg);
    while (engine.step()) {
    }
    MergeResult res;
    res.partition = engine.partition();
    res.params = compute_group_params(sys, res.partition, engine.active_lines());
    res.trace.steps = engine.steps();
    res.trace.stop_reason = engine.stop_reason();
    res.trace.pair_evaluations = engine.pair_evaluations();
    res.trace.rounds = engine.rounds();
    return res;
}

} // namespace colmerge

#endif // COLMERGE_GREEDY_MERGE_HPP
