#include "eivscreen/rng.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace eivscreen {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, std::string_view tag) {
    // FNV-1a over the tag, then fold everything through the mixer.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : tag) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return mix64(mix64(mix64(base) ^ index) ^ h);
}

std::vector<IndexSet> make_folds(Index n, int k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
    if (k > n) {
        std::ostringstream os;
        os << k << " folds for " << n << " observations";
        throw Error(ErrorCode::FoldsExceedN, os.str());
    }
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng(seed);
    // Explicit Fisher-Yates so the permutation depends only on the engine.
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(perm[i], perm[j]);
    }
    std::vector<IndexSet> folds(static_cast<std::size_t>(k));
    const Index base = n / k;
    const Index extra = n % k;
    std::size_t pos = 0;
    for (int f = 0; f < k; ++f) {
        const Index size = base + (f < extra ? 1 : 0);
        auto& fold = folds[static_cast<std::size_t>(f)];
        fold.assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                    perm.begin() + static_cast<std::ptrdiff_t>(pos + static_cast<std::size_t>(size)));
        std::sort(fold.begin(), fold.end());
        pos += static_cast<std::size_t>(size);
    }
    return folds;
}

IndexSet fold_complement(const IndexSet& fold, Index n) {
    IndexSet out;
    out.reserve(static_cast<std::size_t>(n) - fold.size());
    std::size_t a = 0;
    for (Index i = 0; i < n; ++i) {
        if (a < fold.size() && fold[a] == i) {
            ++a;
            continue;
        }
        out.push_back(i);
    }
    return out;
}

}  // namespace eivscreen
