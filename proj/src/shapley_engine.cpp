#include "mmshap/shapley_engine.hpp"

#include <bit>
#include <numeric>
#include <random>
#include <unordered_map>

#include "mmshap/hashing.hpp"

namespace mmshap {

namespace {

constexpr std::size_t kMaxBatchRequests = 2048;
constexpr std::size_t kHardExactLimit = 30;

std::vector<double> evaluate_masks(const TokenizedSample& sample, Oracle& oracle,
                                   const std::vector<CoalitionMask>& masks) {
    std::vector<double> values(masks.size());
    std::vector<OracleRequest> batch;
    batch.reserve(std::min(masks.size(), kMaxBatchRequests));
    for (std::size_t start = 0; start < masks.size(); start += kMaxBatchRequests) {
        const std::size_t stop = std::min(masks.size(), start + kMaxBatchRequests);
        batch.clear();
        for (std::size_t i = start; i < stop; ++i) {
            audit_mask(sample, masks[i]);
            batch.push_back({oracle.next_request_id(), sample.sample_id, masks[i]});
        }
        const std::vector<OracleResponse> responses = oracle.evaluate(batch);
        for (std::size_t i = start; i < stop; ++i) values[i] = responses[i - start].value;
    }
    return values;
}

// Unbiased draw from [0, n) (Lemire's multiply-shift with rejection).
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    std::uint64_t x = rng();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            x = rng();
            m = static_cast<unsigned __int128>(x) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace

std::uint64_t derive_sample_seed(std::uint64_t run_seed, std::string_view sample_id) {
    return splitmix64(run_seed ^ splitmix64(fnv1a64(sample_id)));
}

std::uint64_t permutation_count(std::size_t p, const EstimatorConfig& config) {
    const std::uint64_t per_permutation = p + 1;
    const std::uint64_t budget = config.n_coalitions.value_or(2 * p + 1);
    if (budget < per_permutation) {
        throw Error(Errc::BudgetTooSmall, "coalition budget " + std::to_string(budget) +
                                              " is below one permutation (" +
                                              std::to_string(per_permutation) + ")");
    }
    return (budget + per_permutation - 1) / per_permutation;
}

ShapleyAttribution exact_shapley(const TokenizedSample& sample, Oracle& oracle,
                                 std::size_t exact_limit) {
    const std::vector<std::size_t> positions = sample.maskable_positions();
    const std::size_t p = positions.size();
    if (p == 0) throw Error(Errc::EmptySample, "sample '" + sample.sample_id + "' has no maskable tokens");
    if (p > exact_limit || p > kHardExactLimit) {
        throw Error(Errc::TooManyTokens, "exact enumeration over " + std::to_string(p) +
                                             " tokens exceeds the limit of " +
                                             std::to_string(std::min(exact_limit, kHardExactLimit)));
    }

    const std::uint64_t n_subsets = std::uint64_t{1} << p;
    const CoalitionMask empty = empty_coalition(sample);
    std::vector<CoalitionMask> masks;
    masks.reserve(n_subsets);
    for (std::uint64_t s = 0; s < n_subsets; ++s) {
        CoalitionMask m = empty;
        for (std::size_t k = 0; k < p; ++k) {
            if ((s >> k) & 1U) m.set(positions[k]);
        }
        masks.push_back(std::move(m));
    }
    const std::vector<double> v = evaluate_masks(sample, oracle, masks);

    // Weight of a coalition of size k not containing j: k! (p-k-1)! / p!
    // = 1 / (p * C(p-1, k)).
    std::vector<double> weight(p);
    {
        double binom = 1.0;
        for (std::size_t k = 0; k < p; ++k) {
            weight[k] = 1.0 / (static_cast<double>(p) * binom);
            binom = binom * static_cast<double>(p - 1 - k) / static_cast<double>(k + 1);
        }
    }

    ShapleyAttribution attr;
    attr.sample_id = sample.sample_id;
    attr.phi.assign(sample.token_count(), 0.0);
    for (std::size_t k = 0; k < p; ++k) {
        const std::uint64_t bit = std::uint64_t{1} << k;
        double acc = 0.0;
        for (std::uint64_t s = 0; s < n_subsets; ++s) {
            if (s & bit) continue;
            acc += weight[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
        }
        attr.phi[positions[k]] = acc;
    }
    attr.base_value = v.front();
    attr.full_value = v.back();
    attr.estimator = EstimatorKind::exact;
    attr.n_coalitions = n_subsets;
    attr.oracle_calls = n_subsets;
    return attr;
}

ShapleyAttribution mc_shapley(const TokenizedSample& sample, Oracle& oracle,
                              const EstimatorConfig& config) {
    const std::vector<std::size_t> positions = sample.maskable_positions();
    const std::size_t p = positions.size();
    if (p == 0) throw Error(Errc::EmptySample, "sample '" + sample.sample_id + "' has no maskable tokens");
    const std::uint64_t n_perms = permutation_count(p, config);

    std::mt19937_64 rng(derive_sample_seed(config.seed, sample.sample_id));
    std::vector<std::vector<std::size_t>> permutations(n_perms);
    for (auto& perm : permutations) {
        perm.resize(p);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = p - 1; i > 0; --i) {
            std::swap(perm[i], perm[bounded(rng, i + 1)]);
        }
    }

    // Every permutation walks p + 1 nested coalitions; each distinct one is
    // evaluated once.
    std::unordered_map<CoalitionMask, std::size_t, CoalitionMaskHash> index_of;
    std::vector<CoalitionMask> unique;
    std::vector<std::vector<std::size_t>> walk(n_perms, std::vector<std::size_t>(p + 1));
    auto intern = [&](const CoalitionMask& m) {
        auto [it, inserted] = index_of.try_emplace(m, unique.size());
        if (inserted) unique.push_back(m);
        return it->second;
    };
    for (std::size_t k = 0; k < n_perms; ++k) {
        CoalitionMask m = empty_coalition(sample);
        walk[k][0] = intern(m);
        for (std::size_t t = 0; t < p; ++t) {
            m.set(positions[permutations[k][t]]);
            walk[k][t + 1] = intern(m);
        }
    }
    const std::vector<double> v = evaluate_masks(sample, oracle, unique);

    ShapleyAttribution attr;
    attr.sample_id = sample.sample_id;
    attr.phi.assign(sample.token_count(), 0.0);
    for (std::size_t k = 0; k < n_perms; ++k) {
        for (std::size_t t = 0; t < p; ++t) {
            attr.phi[positions[permutations[k][t]]] += v[walk[k][t + 1]] - v[walk[k][t]];
        }
    }
    for (std::size_t pos : positions) attr.phi[pos] /= static_cast<double>(n_perms);

    attr.base_value = v[walk[0][0]];
    attr.full_value = v[walk[0][p]];
    attr.estimator = EstimatorKind::permutation_mc;
    attr.n_coalitions = n_perms * p + 1;
    attr.seed = config.seed;
    attr.oracle_calls = unique.size();
    return attr;
}

ShapleyAttribution estimate(const TokenizedSample& sample, Oracle& oracle,
                            const EstimatorConfig& config) {
    ShapleyAttribution attr = config.mode == EstimatorKind::exact
                                  ? exact_shapley(sample, oracle, config.exact_limit)
                                  : mc_shapley(sample, oracle, config);
    attr.seed = config.seed;
    return attr;
}

}  // namespace mmshap
