#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "mmshap/core_types.hpp"
#include "mmshap/oracle.hpp"

namespace mmshap {

struct EstimatorConfig {
    EstimatorKind mode = EstimatorKind::permutation_mc;
    /// nullopt means "auto": 2p + 1, rounded up to whole permutations.
    std::optional<std::uint64_t> n_coalitions;
    std::uint64_t seed = 0;
    std::size_t exact_limit = 20;
};

/// Name of the permutation stream; bump the version whenever the mapping
/// from (seed, sample_id) to permutations changes.
inline constexpr std::string_view kPermutationStream = "mt19937_64/fnv1a-splitmix/v1";

/// Per-sample stream seed, independent of dataset order.
std::uint64_t derive_sample_seed(std::uint64_t run_seed, std::string_view sample_id);

/// Number of permutations drawn for `p` maskable tokens under `config`.
/// Throws BudgetTooSmall when the budget cannot cover one permutation.
std::uint64_t permutation_count(std::size_t p, const EstimatorConfig& config);

/// Exact Shapley values by full enumeration of the 2^p coalitions of the
/// maskable tokens. Throws TooManyTokens when p > exact_limit.
ShapleyAttribution exact_shapley(const TokenizedSample& sample, Oracle& oracle,
                                 std::size_t exact_limit = 20);

/// Permutation Monte-Carlo estimate. Each permutation unmasks the maskable
/// tokens one at a time; phi_j is the mean marginal of token j. Efficiency
/// holds per run because marginals along a permutation telescope.
ShapleyAttribution mc_shapley(const TokenizedSample& sample, Oracle& oracle,
                              const EstimatorConfig& config);

/// Dispatches on config.mode.
ShapleyAttribution estimate(const TokenizedSample& sample, Oracle& oracle,
                            const EstimatorConfig& config);

}  // namespace mmshap
