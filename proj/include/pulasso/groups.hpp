#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pulasso {

using Eigen::Index;

/// Partition of the coefficient vector into J groups. Group 0 is always the
/// implicit intercept {0}; user feature columns occupy coefficients 1..p-1.
/// Weight w_0 is unused (the intercept is never penalized).
struct GroupSpec {
    std::vector<std::vector<Index>> groups; // groups[0] == {0}
    Eigen::VectorXd weights;                // size J, weights[0] ignored

    Index n_groups() const { return static_cast<Index>(groups.size()); }

    /// Total coefficient count p (intercept included).
    Index n_coef() const {
        Index p = 0;
        for (const auto& g : groups) p += static_cast<Index>(g.size());
        return p;
    }

    Index max_group_size() const {
        Index m = 0;
        for (const auto& g : groups) m = std::max(m, static_cast<Index>(g.size()));
        return m;
    }

    /// One group per user column with unit weights: the l1 special case.
    static GroupSpec singletons(Index n_user_cols) {
        std::vector<int> ids(static_cast<std::size_t>(n_user_cols));
        std::iota(ids.begin(), ids.end(), 1);
        return from_ids(ids);
    }

    /// Build from per-user-column group ids (ids must be >= 1; the intercept
    /// group 0 is inserted automatically). Absent weights default to
    /// sqrt(|g_j|).
    static GroupSpec from_ids(const std::vector<int>& id_per_col,
                              const std::vector<double>& group_weights = {}) {
        int max_id = 0;
        for (int id : id_per_col) {
            if (id < 1) throw std::invalid_argument("group ids must be >= 1");
            max_id = std::max(max_id, id);
        }
        GroupSpec spec;
        spec.groups.assign(static_cast<std::size_t>(max_id) + 1, {});
        spec.groups[0] = {0};
        for (std::size_t c = 0; c < id_per_col.size(); ++c)
            spec.groups[static_cast<std::size_t>(id_per_col[c])].push_back(static_cast<Index>(c) + 1);
        for (std::size_t j = 1; j < spec.groups.size(); ++j)
            if (spec.groups[j].empty())
                throw std::invalid_argument("group " + std::to_string(j) + " is empty");
        spec.weights.resize(static_cast<Index>(spec.groups.size()));
        spec.weights[0] = 0.0;
        if (!group_weights.empty()) {
            if (group_weights.size() + 1 != spec.groups.size())
                throw std::invalid_argument("expected one weight per non-intercept group");
            for (std::size_t j = 1; j < spec.groups.size(); ++j) {
                double w = group_weights[j - 1];
                if (!(w > 0.0)) throw std::invalid_argument("group weights must be > 0");
                spec.weights[static_cast<Index>(j)] = w;
            }
        } else {
            for (std::size_t j = 1; j < spec.groups.size(); ++j)
                spec.weights[static_cast<Index>(j)] =
                    std::sqrt(static_cast<double>(spec.groups[j].size()));
        }
        return spec;
    }

    /// Disjointness / cover check against a coefficient count p.
    void validate(Index p) const {
        if (groups.empty() || groups[0] != std::vector<Index>{0})
            throw std::invalid_argument("group 0 must be the intercept {0}");
        std::vector<char> seen(static_cast<std::size_t>(p), 0);
        for (const auto& g : groups) {
            if (g.empty()) throw std::invalid_argument("empty group");
            for (Index c : g) {
                if (c < 0 || c >= p) throw std::invalid_argument("group column out of range");
                if (seen[static_cast<std::size_t>(c)]) throw std::invalid_argument("overlapping groups");
                seen[static_cast<std::size_t>(c)] = 1;
            }
        }
        for (char s : seen)
            if (!s) throw std::invalid_argument("groups do not cover all columns");
        if (weights.size() != n_groups())
            throw std::invalid_argument("weights size mismatch");
        for (Index j = 1; j < n_groups(); ++j)
            if (!(weights[j] > 0.0)) throw std::invalid_argument("group weights must be > 0");
    }
};

} // namespace pulasso
