#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chunkplan/chunking.hpp"
#include "chunkplan/error.hpp"
#include "chunkplan/hardware_profile.hpp"
#include "chunkplan/precision.hpp"
#include "chunkplan/units.hpp"

namespace chunkplan {

enum class Device { gpu, cpu };

inline std::string_view to_string(Device d) { return d == Device::gpu ? "GPU" : "CPU"; }

inline Device parse_device(std::string_view text) {
    if (text == "GPU") return Device::gpu;
    if (text == "CPU") return Device::cpu;
    fail(ErrorKind::parse, "unknown device '" + std::string(text) + "' (expected GPU or CPU)");
}

/// Belady is the production policy; LRU exists only as a comparison foil.
enum class Replacement { belady, lru };

struct CacheConfig {
    std::size_t n_block = 1;
    Elements chunk_length = 0;
    std::vector<Device> placement;  // home device per chunk id
    PrecisionSpec precision;
    int gpu_count = 1;
    std::optional<RateTable> rates;  // rates at n = gpu_count; enables time estimates
    VelocityConvention velocity;
    Replacement policy = Replacement::belady;
};

struct SimReport {
    std::uint64_t gather_ops = 0;
    Bytes gather_bytes = 0;
    std::uint64_t reduce_ops = 0;
    Bytes reduce_bytes = 0;
    Bytes g2c_bytes = 0;
    Bytes c2g_bytes = 0;
    Bytes g2c_shard_bytes = 0;  // per-GPU share of g2c_bytes
    Bytes c2g_shard_bytes = 0;
    std::uint64_t evictions = 0;
    Bytes replaced_bytes = 0;
    std::uint64_t peak_rcache_blocks = 0;
    double estimated_offload_seconds = 0.0;
    double estimated_update_seconds = 0.0;

    Bytes g2g_bytes() const { return gather_bytes + reduce_bytes; }

    friend bool operator==(const SimReport&, const SimReport&) = default;
};

namespace detail {

inline constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();

/// Inclusive step window during which a resident chunk may not be evicted.
/// The chunk is released (freed, not evicted) at the end of step `end`.
struct PinWindow {
    std::size_t begin = kNever;
    std::size_t end = kNever;
};

struct CacheEvent {
    std::size_t step;
    ChunkId chunk;
};

struct CacheRun {
    std::vector<CacheEvent> gathers;
    std::vector<CacheEvent> releases;
    std::uint64_t evictions = 0;
    std::uint64_t refetch_evictions = 0;  // evicted chunk is accessed again later
    std::size_t peak_resident = 0;
};

/// Replays `steps` against a cache of `n_block` equal-sized blocks. Each
/// step's chunks must be resident together; missing ones are gathered in
/// ascending id order. Victims are never taken from the current step or
/// from a pinned window.
inline CacheRun run_cache(const std::vector<std::vector<ChunkId>>& steps, std::size_t n_chunks,
                          std::size_t n_block, Replacement policy,
                          std::span<const PinWindow> pins = {}) {
    if (n_block < 1) fail(ErrorKind::invalid_argument, "n_block must be >= 1");
    for (std::size_t t = 0; t < steps.size(); ++t) {
        if (steps[t].size() > n_block) {
            fail(ErrorKind::infeasible, "step " + std::to_string(t) + " touches " +
                                            std::to_string(steps[t].size()) +
                                            " chunks but rCache has only " +
                                            std::to_string(n_block) + " blocks");
        }
    }

    std::vector<std::vector<std::size_t>> uses(n_chunks);
    for (std::size_t t = 0; t < steps.size(); ++t) {
        for (auto c : steps[t]) {
            if (c >= n_chunks) fail(ErrorKind::consistency, "chunk id out of range in trace");
            uses[c].push_back(t);
        }
    }
    std::vector<std::size_t> cursor(n_chunks, 0);
    auto next_use = [&](ChunkId c) {
        return cursor[c] < uses[c].size() ? uses[c][cursor[c]] : kNever;
    };

    std::vector<char> resident(n_chunks, 0);
    std::vector<char> in_step(n_chunks, 0);
    std::vector<std::size_t> last_use(n_chunks, 0);
    std::vector<ChunkId> cached;  // resident set, unordered
    CacheRun run;

    auto pinned = [&](ChunkId c, std::size_t t) {
        return !pins.empty() && pins[c].begin != kNever && pins[c].begin <= t && t <= pins[c].end;
    };

    for (std::size_t t = 0; t < steps.size(); ++t) {
        std::vector<ChunkId> step = steps[t];
        std::sort(step.begin(), step.end());
        for (auto c : step) in_step[c] = 1;

        for (auto c : step) {
            if (resident[c]) continue;
            if (cached.size() == n_block) {
                std::size_t victim_pos = kNever;
                for (std::size_t i = 0; i < cached.size(); ++i) {
                    const ChunkId cand = cached[i];
                    if (in_step[cand] || pinned(cand, t)) continue;
                    if (victim_pos == kNever) {
                        victim_pos = i;
                        continue;
                    }
                    const ChunkId best = cached[victim_pos];
                    bool better = false;
                    if (policy == Replacement::belady) {
                        const auto nc = next_use(cand);
                        const auto nb = next_use(best);
                        better = nc > nb || (nc == nb && cand < best);
                    } else {
                        better = last_use[cand] < last_use[best] ||
                                 (last_use[cand] == last_use[best] && cand < best);
                    }
                    if (better) victim_pos = i;
                }
                if (victim_pos == kNever) {
                    fail(ErrorKind::infeasible,
                         "rCache with " + std::to_string(n_block) +
                             " blocks cannot hold the pinned and active chunks at step " +
                             std::to_string(t));
                }
                const ChunkId victim = cached[victim_pos];
                cached[victim_pos] = cached.back();
                cached.pop_back();
                resident[victim] = 0;
                ++run.evictions;
                if (next_use(victim) != kNever) ++run.refetch_evictions;
            }
            resident[c] = 1;
            cached.push_back(c);
            run.gathers.push_back({t, c});
        }
        run.peak_resident = std::max(run.peak_resident, cached.size());

        for (auto c : step) {
            in_step[c] = 0;
            last_use[c] = t;
            ++cursor[c];
        }
        if (!pins.empty()) {
            for (auto c : step) {
                if (pins[c].end != t) continue;
                resident[c] = 0;
                cached.erase(std::find(cached.begin(), cached.end(), c));
                run.releases.push_back({t, c});
            }
        }
    }
    return run;
}

/// Forward steps followed by backward steps, plus the gradient pin window of
/// every chunk: from its first backward access until its reduce position.
struct StepSchedule {
    std::vector<std::vector<ChunkId>> steps;
    std::vector<PinWindow> pins;
};

inline StepSchedule training_step_schedule(const ChunkTrace& trace) {
    StepSchedule s;
    const std::size_t fwd = trace.forward.size();
    s.steps.reserve(fwd + trace.backward.size());
    s.steps.insert(s.steps.end(), trace.forward.begin(), trace.forward.end());
    s.steps.insert(s.steps.end(), trace.backward.begin(), trace.backward.end());
    s.pins.assign(trace.n_chunks(), PinWindow{});
    for (std::size_t j = 0; j < trace.backward.size(); ++j) {
        for (auto c : trace.backward[j]) {
            if (s.pins[c].begin == kNever) s.pins[c].begin = fwd + j;
        }
    }
    for (std::size_t c = 0; c < trace.n_chunks(); ++c) {
        s.pins[c].end = fwd + trace.reduce_after[c];
        if (s.pins[c].begin == kNever) s.pins[c].begin = s.pins[c].end;
    }
    return s;
}

}  // namespace detail

/// Smallest rCache that can run one training step: the largest number of
/// chunks that must be resident at once (the active node plus chunks still
/// holding unreduced gradients).
inline std::size_t min_feasible_blocks(const ChunkTrace& trace) {
    const auto sched = detail::training_step_schedule(trace);
    std::size_t best = 0;
    const std::size_t n = trace.n_chunks();
    std::vector<char> mark(n, 0);
    for (std::size_t t = 0; t < sched.steps.size(); ++t) {
        std::size_t count = 0;
        for (auto c : sched.steps[t]) {
            if (!mark[c]) {
                mark[c] = 1;
                ++count;
            }
        }
        for (std::size_t c = 0; c < n; ++c) {
            if (!mark[c] && sched.pins[c].begin <= t && t <= sched.pins[c].end) ++count;
        }
        for (auto c : sched.steps[t]) mark[c] = 0;
        best = std::max(best, count);
    }
    return best;
}

/// Largest chunk set of any single coarse node.
inline std::size_t max_node_chunks(const ChunkTrace& trace) {
    std::size_t best = 0;
    for (const auto& node : trace.forward) best = std::max(best, node.size());
    return best;
}

/// Trace-driven simulation of one training step through the rCache.
inline SimReport simulate(const ChunkTrace& trace, const CacheConfig& config) {
    config.precision.validate();
    if (config.n_block < 1) fail(ErrorKind::invalid_argument, "n_block must be >= 1");
    if (config.chunk_length < 1) fail(ErrorKind::invalid_argument, "chunk length must be >= 1");
    if (config.gpu_count < 1) fail(ErrorKind::invalid_argument, "gpu_count must be >= 1");
    if (config.placement.size() != trace.n_chunks()) {
        fail(ErrorKind::consistency, "placement covers " + std::to_string(config.placement.size()) +
                                         " chunks but the trace has " +
                                         std::to_string(trace.n_chunks()));
    }
    if (config.n_block < max_node_chunks(trace)) {
        fail(ErrorKind::infeasible, "n_block " + std::to_string(config.n_block) +
                                        " is below the working set of " +
                                        std::to_string(max_node_chunks(trace)) + " chunks");
    }

    const auto sched = detail::training_step_schedule(trace);
    const auto run = detail::run_cache(sched.steps, trace.n_chunks(), config.n_block,
                                       config.policy, sched.pins);

    const Bytes chunk_bytes = config.precision.compute_bytes * config.chunk_length;
    SimReport r;
    for (const auto& g : run.gathers) {
        ++r.gather_ops;
        r.gather_bytes += chunk_bytes;
        if (config.placement[g.chunk] == Device::cpu) r.c2g_bytes += chunk_bytes;
    }
    for (const auto& rel : run.releases) {
        ++r.reduce_ops;
        r.reduce_bytes += chunk_bytes;
        if (config.placement[rel.chunk] == Device::cpu) r.g2c_bytes += chunk_bytes;
    }
    const auto n = static_cast<std::uint64_t>(config.gpu_count);
    r.g2c_shard_bytes = ceil_div(r.g2c_bytes, n);
    r.c2g_shard_bytes = ceil_div(r.c2g_bytes, n);
    r.evictions = run.evictions;
    r.replaced_bytes = run.refetch_evictions * chunk_bytes;
    r.peak_rcache_blocks = run.peak_resident;

    if (config.rates) {
        const auto& rt = *config.rates;
        r.estimated_offload_seconds = static_cast<double>(r.g2c_bytes) / rt.b_g2c +
                                      static_cast<double>(r.c2g_bytes) / rt.b_c2g;
        const auto ob = config.precision.optimizer_bytes;
        const double vg = config.velocity.elements_per_second(rt.v_g, ob);
        const double vc = config.velocity.elements_per_second(rt.v_c, ob);
        const double len = static_cast<double>(config.chunk_length);
        for (auto home : config.placement) {
            r.estimated_update_seconds += len / (home == Device::gpu ? vg : vc);
        }
    }
    return r;
}

/// Bytes of chunks that Belady evicts and later has to gather again during
/// one training step.
inline Bytes replaced_bytes(const ChunkTrace& trace, std::size_t n_block, Elements chunk_length,
                            const PrecisionSpec& precision) {
    CacheConfig cfg;
    cfg.n_block = n_block;
    cfg.chunk_length = chunk_length;
    cfg.placement.assign(trace.n_chunks(), Device::gpu);
    cfg.precision = precision;
    return simulate(trace, cfg).replaced_bytes;
}

struct MissCount {
    std::uint64_t misses = 0;
    std::uint64_t refetch_evictions = 0;
};

/// Plain cache replay of a flat access sequence (one chunk per access, no
/// gradient pinning), sharing the replacement engine used by `simulate`.
inline MissCount count_misses(std::span<const ChunkId> sequence, std::size_t n_block,
                              Replacement policy = Replacement::belady) {
    std::vector<std::vector<ChunkId>> steps;
    steps.reserve(sequence.size());
    std::size_t n_chunks = 0;
    for (auto c : sequence) {
        steps.push_back({c});
        n_chunks = std::max<std::size_t>(n_chunks, c + 1);
    }
    const auto run = detail::run_cache(steps, n_chunks, n_block, policy);
    return {run.gathers.size(), run.refetch_evictions};
}

}  // namespace chunkplan
