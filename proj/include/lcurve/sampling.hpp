#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <map>
#include <span>
#include <vector>

#include "lcurve/errors.hpp"
#include "lcurve/random.hpp"

namespace lcurve {

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::size_t singleton_strata = 0; // strata of size 1, sent to train
};

// Per stratum, round(fraction * size) members go to train (at least one on
// each side when the stratum has two or more members). `keys[i]` is the
// stratum of `indices[i]`. Both outputs are sorted ascending.
inline Split stratified_split(std::span<const std::size_t> indices, std::span<const int> keys, double fraction,
                             Rng& rng) {
    if (indices.size() != keys.size()) throw InvalidArgument("indices and strata keys differ in length");
    if (indices.size() < 2) throw InvalidArgument("stratified split needs at least two subjects");
    if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("split fraction must be in (0, 1)");

    std::map<int, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < indices.size(); ++i) strata[keys[i]].push_back(indices[i]);

    Split out;
    for (auto& [key, members] : strata) {
        std::shuffle(members.begin(), members.end(), rng);
        if (members.size() == 1) {
            out.train.push_back(members.front());
            ++out.singleton_strata;
            continue;
        }
        const auto size = static_cast<long long>(members.size());
        const long long n_train = std::clamp(std::llround(fraction * static_cast<double>(size)), 1LL, size - 1);
        out.train.insert(out.train.end(), members.begin(), members.begin() + n_train);
        out.test.insert(out.test.end(), members.begin() + n_train, members.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

// `size` distinct elements of `pool`, in pool order.
inline std::vector<std::size_t> subsample_without_replacement(std::span<const std::size_t> pool, std::size_t size,
                                                              Rng& rng) {
    if (size > pool.size()) throw InvalidArgument("subsample larger than its pool");
    std::vector<std::size_t> out;
    out.reserve(size);
    std::sample(pool.begin(), pool.end(), std::back_inserter(out), size, rng);
    return out;
}

} // namespace lcurve
