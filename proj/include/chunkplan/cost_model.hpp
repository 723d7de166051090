#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chunkplan/error.hpp"
#include "chunkplan/precision.hpp"
#include "chunkplan/units.hpp"

namespace chunkplan {

enum class Strategy { ddp, zero1, zero2, zero3, rcache_max, rcache_min };

inline constexpr std::array<Strategy, 6> kAllStrategies = {
    Strategy::ddp,   Strategy::zero1,      Strategy::zero2,
    Strategy::zero3, Strategy::rcache_max, Strategy::rcache_min,
};

inline std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::ddp: return "DDP";
        case Strategy::zero1: return "ZeRO-1";
        case Strategy::zero2: return "ZeRO-2";
        case Strategy::zero3: return "ZeRO-3";
        case Strategy::rcache_max: return "rCache-max";
        case Strategy::rcache_min: return "rCache-min";
    }
    return "?";
}

inline Strategy parse_strategy(std::string_view name) {
    for (auto s : kAllStrategies) {
        if (to_string(s) == name) return s;
    }
    fail(ErrorKind::invalid_argument, "unknown strategy '" + std::string(name) + "'");
}

/// DDP and ZeRO-1 have no offload variant.
constexpr bool has_offload_variant(Strategy s) { return s != Strategy::ddp && s != Strategy::zero1; }

struct StrategySpec {
    Strategy strategy = Strategy::ddp;
    bool offload = false;
    std::optional<Bytes> epsilon_bytes;  // gathered-parameter buffer, ZeRO-3 offload only
};

struct CostRow {
    Bytes gpu_mem_per_gpu = 0;
    Bytes g2c_comm = 0;
    Bytes g2g_comm = 0;

    friend bool operator==(const CostRow&, const CostRow&) = default;
};

/// Per-GPU memory and per-step communication volume of one strategy.
/// M = model elements, S = aggregate chunk elements, C = chunk length.
/// Terms divided by N are rounded up (shards are padded).
inline CostRow strategy_costs(Elements model_elements, std::uint64_t gpus,
                              const PrecisionSpec& precision, const StrategySpec& spec,
                              Elements aggregate_chunk_elements, Elements chunk_length) {
    precision.validate();
    if (model_elements < 1 || gpus < 1 || aggregate_chunk_elements < 1 || chunk_length < 1) {
        fail(ErrorKind::invalid_argument, "M, N, S and C must all be >= 1");
    }
    if (spec.offload && !has_offload_variant(spec.strategy)) {
        fail(ErrorKind::invalid_argument,
             std::string(to_string(spec.strategy)) + " has no offload variant");
    }
    const std::uint64_t lc = precision.compute_bytes;
    const std::uint64_t os = precision.optimizer_state_bytes();
    const std::uint64_t M = model_elements;
    const std::uint64_t S = aggregate_chunk_elements;
    const std::uint64_t C = chunk_length;
    const std::uint64_t N = gpus;

    switch (spec.strategy) {
        case Strategy::ddp:
            return {(lc + lc + os) * M, 0, 2 * lc * M};
        case Strategy::zero1:
            return {(lc + lc) * M + ceil_div(os * M, N), 0, 2 * lc * M};
        case Strategy::zero2:
            if (spec.offload) return {lc * M, 2 * lc * M, 2 * lc * M};
            return {lc * M + ceil_div((lc + os) * M, N), 0, 2 * lc * M};
        case Strategy::zero3:
            if (spec.offload) {
                if (!spec.epsilon_bytes || *spec.epsilon_bytes == 0) {
                    fail(ErrorKind::invalid_argument,
                         "ZeRO-3 offload needs a positive gathered-parameter buffer size (epsilon)");
                }
                return {*spec.epsilon_bytes, 4 * lc * M, 4 * lc * M};
            }
            return {ceil_div((lc + lc + os) * M, N), 0, 4 * lc * M};
        case Strategy::rcache_max:
            if (spec.offload) return {lc * S, 2 * lc * S, 2 * lc * S};
            return {lc * S + ceil_div((lc + os) * S, N), 0, 2 * lc * S};
        case Strategy::rcache_min:
            if (spec.offload) return {lc * C, 4 * lc * S, 4 * lc * S};
            return {lc * C + ceil_div((lc + os) * S, N), 0, 4 * lc * S};
    }
    fail(ErrorKind::invalid_argument, "unknown strategy");
}

/// Per-GPU bytes of one partitioned parameter chunk plus its optimizer chunk.
inline Bytes chunk_footprint(Elements chunk_length, std::uint64_t gpus, const PrecisionSpec& precision) {
    if (chunk_length < 1 || gpus < 1) fail(ErrorKind::invalid_argument, "C and N must be >= 1");
    return ceil_div((precision.compute_bytes + precision.optimizer_state_bytes()) * chunk_length, gpus);
}

struct ModelStateBytes {
    Bytes params = 0;
    Bytes grads = 0;
    Bytes optimizer = 0;

    Bytes total() const { return params + grads + optimizer; }
    friend bool operator==(const ModelStateBytes&, const ModelStateBytes&) = default;
};

inline ModelStateBytes mixed_precision_states(Elements model_elements, const PrecisionSpec& precision) {
    if (model_elements < 1) fail(ErrorKind::invalid_argument, "model size must be >= 1");
    return {precision.compute_bytes * model_elements, precision.compute_bytes * model_elements,
            precision.optimizer_state_bytes() * model_elements};
}

/// Training throughput in TFLOPS, counting 8 FLOPs per parameter per token
/// (forward, backward and activation recompute).
inline double tflops_metric(double model_elements, double tokens, double elapsed_seconds) {
    if (!(elapsed_seconds > 0.0)) fail(ErrorKind::invalid_argument, "elapsed time must be positive");
    return 8.0 * model_elements * tokens / elapsed_seconds / 1e12;
}

struct CompareRow {
    Strategy strategy;
    bool offload;
    std::optional<CostRow> cost;  // empty when the row needs epsilon and none was given
};

/// All ten strategy rows in table order: each strategy, then its offload
/// variant where one exists.
inline std::vector<CompareRow> compare_strategies(Elements model_elements, std::uint64_t gpus,
                                                  const PrecisionSpec& precision,
                                                  Elements aggregate_chunk_elements,
                                                  Elements chunk_length,
                                                  std::optional<Bytes> epsilon_bytes) {
    std::vector<CompareRow> rows;
    for (auto s : kAllStrategies) {
        for (bool offload : {false, true}) {
            if (offload && !has_offload_variant(s)) continue;
            CompareRow row{s, offload, std::nullopt};
            if (!(s == Strategy::zero3 && offload && !epsilon_bytes)) {
                row.cost = strategy_costs(model_elements, gpus, precision,
                                          {s, offload, epsilon_bytes}, aggregate_chunk_elements,
                                          chunk_length);
            }
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace chunkplan
