#include "drbounds/collider_bounds.hpp"

#include "drbounds/parallel.hpp"
#include "drbounds/seeding.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <stdexcept>

namespace drbounds {

namespace {

constexpr unsigned long long kCountSaturation = 1ULL << 62;

// Sum_{j<=k} C(m,j), saturating well below overflow.
unsigned long long count_subsets(int m, int k) {
    unsigned long long total = 0;
    unsigned __int128 c = 1; // C(m, j) running value
    for (int j = 0; j <= k; ++j) {
        if (j > 0) c = c * static_cast<unsigned>(m - j + 1) / static_cast<unsigned>(j);
        if (c > kCountSaturation || total > kCountSaturation) return kCountSaturation;
        total += static_cast<unsigned long long>(c);
    }
    return std::min(total, kCountSaturation);
}

} // namespace

std::string SubsetIndex::str() const {
    std::string out = "{";
    for (std::size_t i = 0; i < excluded.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(excluded[i]);
    }
    return out + "}";
}

std::vector<SubsetIndex> enumerate_subsets(int d, int k,
                                           const std::vector<int>& known_non_colliders,
                                           std::size_t enum_cap) {
    if (d < 0) throw std::invalid_argument("enumerate_subsets: d must be >= 0");
    if (k < 0) throw std::invalid_argument("enumerate_subsets: k must be >= 0");
    std::set<int> blocked;
    for (int idx : known_non_colliders) {
        if (idx < 0 || idx >= d)
            throw std::invalid_argument("enumerate_subsets: known non-collider index " +
                                        std::to_string(idx) + " out of range for d=" +
                                        std::to_string(d));
        blocked.insert(idx);
    }
    std::vector<int> candidates;
    for (int i = 0; i < d; ++i)
        if (!blocked.count(i)) candidates.push_back(i);
    const int m = static_cast<int>(candidates.size());
    const int k_eff = std::min(k, m);

    const unsigned long long count = count_subsets(m, k_eff);
    if (count > enum_cap) {
        const std::string shown =
            count >= kCountSaturation ? "more than " + std::to_string(kCountSaturation)
                                      : std::to_string(count);
        throw std::invalid_argument("enumerate_subsets: " + shown +
                                    " subsets exceed the cap of " + std::to_string(enum_cap) +
                                    "; lower k or add known non-colliders");
    }

    std::vector<SubsetIndex> out;
    out.reserve(static_cast<std::size_t>(count));
    out.push_back(SubsetIndex{}); // empty set first: fully adjusted analysis
    for (int size = 1; size <= k_eff; ++size) {
        std::vector<int> pos(static_cast<std::size_t>(size));
        for (int i = 0; i < size; ++i) pos[static_cast<std::size_t>(i)] = i;
        while (true) {
            SubsetIndex s;
            s.excluded.reserve(static_cast<std::size_t>(size));
            for (int p : pos) s.excluded.push_back(candidates[static_cast<std::size_t>(p)]);
            out.push_back(std::move(s));
            // advance to the next combination in lexicographic order
            int i = size - 1;
            while (i >= 0 && pos[static_cast<std::size_t>(i)] == m - size + i) --i;
            if (i < 0) break;
            ++pos[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < size; ++j)
                pos[static_cast<std::size_t>(j)] = pos[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    return out;
}

PartialIdentificationResult estimate_bounds(const Dataset& ds, const BoundsConfig& config) {
    if (config.method != "dr" && config.method != "ipw" && config.method != "plugin" &&
        config.method != "psm")
        throw std::invalid_argument("estimate_bounds: unknown method '" + config.method +
                                    "' (expected dr, ipw, plugin, or psm)");
    const auto subsets =
        enumerate_subsets(ds.d(), config.max_colliders, config.known_non_colliders,
                          config.enum_cap);
    const auto outcome = make_outcome_learner(config.outcome_learner);
    const auto propensity = make_propensity_learner(config.propensity_learner);

    PartialIdentificationResult out;
    out.config = config;
    out.entries.resize(subsets.size());
    parallel_for(subsets.size(), config.jobs, [&](std::size_t i) {
        const SubsetIndex& sub = subsets[i];
        try {
            const Dataset view = subset_covariates(
                ds, std::set<int>(sub.excluded.begin(), sub.excluded.end()));
            const std::uint64_t sub_seed = config.seed ^ fnv1a64(sub.excluded);
            const NuisanceEstimates nuis = crossfit_nuisances(
                view, outcome, propensity, config.folds, config.clip_epsilon, sub_seed);
            BootstrapConfig bs;
            bs.B = config.bootstrap_B;
            bs.refit = true;
            bs.seed = sub_seed;
            bs.jobs = 1; // subsets are already the parallel unit
            out.entries[i] = BoundEntry{sub, estimate_by_name(config.method, view, nuis, bs)};
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("subset " + sub.str() + ": " + e.what());
        } catch (const std::exception& e) {
            throw std::runtime_error("subset " + sub.str() + ": " + e.what());
        }
    });

    out.argmin = 0;
    out.argmax = 0;
    for (std::size_t i = 1; i < out.entries.size(); ++i) {
        if (out.entries[i].estimate.point < out.entries[out.argmin].estimate.point) out.argmin = i;
        if (out.entries[i].estimate.point > out.entries[out.argmax].estimate.point) out.argmax = i;
    }
    out.point_lower = out.entries[out.argmin].estimate.point;
    out.point_upper = out.entries[out.argmax].estimate.point;
    out.outer_ci_lower = std::numeric_limits<double>::infinity();
    out.outer_ci_upper = -std::numeric_limits<double>::infinity();
    for (const auto& e : out.entries) {
        out.outer_ci_lower = std::min(out.outer_ci_lower, e.estimate.ci_lower);
        out.outer_ci_upper = std::max(out.outer_ci_upper, e.estimate.ci_upper);
    }
    return out;
}

} // namespace drbounds
