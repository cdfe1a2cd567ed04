#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "eivscreen/core.hpp"

namespace eivscreen {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

// Seed for the stream identified by (base, index, tag). Streams with
// different tags are statistically independent and do not shift when other
// streams are added or removed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, std::string_view tag);

inline Rng make_rng(std::uint64_t base, std::uint64_t index, std::string_view tag) {
    return Rng(derive_seed(base, index, tag));
}

// Random near-equal partition of {0..n-1} into k folds. Fold sizes differ by
// at most one; the n mod k leftover observations go one each to folds 0, 1, ...
// Each fold is returned sorted.
std::vector<IndexSet> make_folds(Index n, int k, std::uint64_t seed);

// Complement of a sorted fold within {0..n-1}.
IndexSet fold_complement(const IndexSet& fold, Index n);

}  // namespace eivscreen
