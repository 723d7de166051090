#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "chunkplan/error.hpp"
#include "chunkplan/units.hpp"

namespace chunkplan {

inline constexpr std::size_t kOracleMaxAccesses = 20;
inline constexpr std::size_t kOracleMaxDistinct = 8;

/// Minimum number of misses any demand-paging schedule can achieve on
/// `sequence` with `n_block` blocks, found by exploring every eviction
/// choice. Exponential; intended only as a test oracle. Independent of the
/// replacement engine in rcache_sim.hpp.
inline std::uint64_t oracle_min_misses(std::span<const ChunkId> sequence, std::size_t n_block) {
    if (n_block < 1) fail(ErrorKind::invalid_argument, "n_block must be >= 1");
    std::map<ChunkId, unsigned> index;
    for (auto c : sequence) index.try_emplace(c, static_cast<unsigned>(index.size()));
    if (sequence.size() > kOracleMaxAccesses || index.size() > kOracleMaxDistinct) {
        fail(ErrorKind::oracle_limit, "oracle limited to " + std::to_string(kOracleMaxAccesses) +
                                          " accesses and " + std::to_string(kOracleMaxDistinct) +
                                          " distinct chunks");
    }
    std::vector<unsigned> seq;
    seq.reserve(sequence.size());
    for (auto c : sequence) seq.push_back(index.at(c));

    const std::size_t len = seq.size();
    constexpr std::uint64_t unknown = ~std::uint64_t{0};
    // memo[pos][cache contents bitmask]
    std::vector<std::vector<std::uint64_t>> memo(len + 1,
                                                 std::vector<std::uint64_t>(1u << kOracleMaxDistinct, unknown));

    auto best = [&](auto&& self, std::size_t pos, unsigned mask) -> std::uint64_t {
        if (pos == len) return 0;
        auto& slot = memo[pos][mask];
        if (slot != unknown) return slot;
        const unsigned bit = 1u << seq[pos];
        std::uint64_t result = 0;
        if (mask & bit) {
            result = self(self, pos + 1, mask);
        } else if (static_cast<std::size_t>(__builtin_popcount(mask)) < n_block) {
            result = 1 + self(self, pos + 1, mask | bit);
        } else {
            result = unknown;
            for (unsigned v = 0; v < kOracleMaxDistinct; ++v) {
                if (!(mask & (1u << v))) continue;
                result = std::min(result, 1 + self(self, pos + 1, (mask & ~(1u << v)) | bit));
            }
        }
        slot = result;
        return result;
    };
    return best(best, 0, 0);
}

}  // namespace chunkplan
