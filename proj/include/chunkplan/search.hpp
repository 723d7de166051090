#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chunkplan/access_trace.hpp"
#include "chunkplan/chunking.hpp"
#include "chunkplan/cost_model.hpp"
#include "chunkplan/error.hpp"
#include "chunkplan/hardware_profile.hpp"
#include "chunkplan/model_profile.hpp"
#include "chunkplan/precision.hpp"
#include "chunkplan/rcache_sim.hpp"
#include "chunkplan/units.hpp"

namespace chunkplan {

// ---------------------------------------------------------------------------
// Memory budget

struct BudgetSpec {
    double f_alloc = 0.95;  // fraction of GPU memory usable by model state
    double f_frag = 1.25;   // fragmentation inflation applied to activations
    std::optional<Bytes> u_allowed;  // explicit override, skips the formula

    void validate() const {
        if (!(f_alloc > 0.0 && f_alloc <= 1.0)) fail(ErrorKind::invalid_argument, "f_alloc must be in (0, 1]");
        if (!(f_frag >= 1.0)) fail(ErrorKind::invalid_argument, "f_frag must be >= 1");
    }
};

struct AllowedMemory {
    Bytes bytes = 0;
    bool clamped = false;  // reserves exceeded capacity
};

inline AllowedMemory allowed_memory(double capacity_bytes, double buffer_bytes, double activation_bytes,
                                    double f_alloc = 0.95, double f_frag = 1.25) {
    if (capacity_bytes < 0 || buffer_bytes < 0 || activation_bytes < 0) {
        fail(ErrorKind::invalid_argument, "memory quantities must be non-negative");
    }
    BudgetSpec{f_alloc, f_frag, std::nullopt}.validate();
    const double free = capacity_bytes - buffer_bytes - f_frag * activation_bytes;
    if (free <= 0.0) return {0, true};
    return {static_cast<Bytes>(std::floor(f_alloc * free)), false};
}

// ---------------------------------------------------------------------------
// Benefit of spending one unit of GPU memory

/// Time saved per byte-normalised unit when rCache grows by one block: the
/// extra cached chunk skips one offload round trip in the backward pass.
inline double benefit_I(int n, Elements chunk_length, const HardwareProfile& hw,
                        const PrecisionSpec& precision) {
    const auto& rt = hw.rates(n);
    const double lc = static_cast<double>(precision.compute_bytes);
    const double c = static_cast<double>(chunk_length);
    return (1.0 / lc) * (lc * c / rt.b_g2c + lc * c / rt.b_c2g);
}

/// Time saved per normalised unit when a chunk (and its optimizer chunk)
/// moves to GPU: no offload traffic for it, and its update runs on GPU.
inline double benefit_J(int n, Elements chunk_length, const HardwareProfile& hw,
                        const PrecisionSpec& precision, const VelocityConvention& velocity = {}) {
    const auto& rt = hw.rates(n);
    const double lc = static_cast<double>(precision.compute_bytes);
    const double los = static_cast<double>(precision.optimizer_bytes);
    const double fos = static_cast<double>(precision.optimizer_factor);
    const double c = static_cast<double>(chunk_length);
    const double vg = velocity.elements_per_second(rt.v_g, precision.optimizer_bytes);
    const double vc = velocity.elements_per_second(rt.v_c, precision.optimizer_bytes);
    const double comm = los * c / rt.b_c2g + lc * benefit_I(n, chunk_length, hw, precision) +
                        lc * c / rt.b_g2c;
    const double update = c / vc - c / vg;
    return static_cast<double>(n) / (lc + los * fos) * (comm + update);
}

// ---------------------------------------------------------------------------
// Chunk length search

inline constexpr std::size_t kDefaultGridPoints = 16;

/// Geometric grid of integer chunk lengths from `lo` to `hi` inclusive.
inline std::vector<Elements> geometric_grid(Elements lo, Elements hi, std::size_t points) {
    std::vector<Elements> grid;
    if (lo < 1) lo = 1;
    if (hi <= lo || points <= 1) return {lo};
    const double ratio = std::pow(static_cast<double>(hi) / static_cast<double>(lo),
                                  1.0 / static_cast<double>(points - 1));
    for (std::size_t i = 0; i < points; ++i) {
        auto v = static_cast<Elements>(std::llround(static_cast<double>(lo) * std::pow(ratio, i)));
        v = std::clamp(v, lo, hi);
        if (grid.empty() || grid.back() != v) grid.push_back(v);
    }
    grid.back() = hi;
    return grid;
}

/// Default candidates: from the largest single-use parameter up to the
/// per-GPU share of all chunked elements.
inline std::vector<Elements> default_candidate_grid(const ModelProfile& profile, int gpus,
                                                    std::size_t points = kDefaultGridPoints) {
    const auto part = partition_multiuse(profile);
    Elements max_numel = 1;
    Elements total = 0;
    for (const auto& p : part.single_use) {
        max_numel = std::max(max_numel, p.numel);
        total += p.numel;
    }
    const Elements hi = ceil_div(total, static_cast<std::uint64_t>(std::max(gpus, 1)));
    return geometric_grid(max_numel, std::max(hi, max_numel), points);
}

struct ChunkCandidate {
    Elements chunk_length = 0;
    bool skipped = false;  // smaller than the largest parameter
    std::size_t n_chunks = 0;
    std::size_t n_block = 0;
    double waste_rate = 0.0;
    Bytes replaced_bytes = 0;
};

struct ChunkSearch {
    Elements chunk_length = 0;
    std::vector<ChunkCandidate> candidates;  // in input order
};

/// Evaluates one candidate chunk length against a provisional rCache budget.
inline ChunkCandidate evaluate_chunk_length(std::span<const ParameterSpec> sequence,
                                            const AccessTrace& trace, Elements chunk_length,
                                            Bytes provisional_budget, const PrecisionSpec& precision) {
    ChunkCandidate row;
    row.chunk_length = chunk_length;
    Elements max_numel = 0;
    for (const auto& p : sequence) max_numel = std::max(max_numel, p.numel);
    if (chunk_length < 1 || chunk_length < max_numel) {
        row.skipped = true;
        return row;
    }
    const auto layout = pack_chunks(sequence, chunk_length);
    const auto ctrace = build_chunk_trace(trace, layout);
    const Bytes block_bytes = precision.compute_bytes * chunk_length;
    const std::size_t floor_blocks = min_feasible_blocks(ctrace);
    const auto affordable = static_cast<std::size_t>(provisional_budget / block_bytes);
    row.n_chunks = layout.n_chunks();
    row.n_block = std::min(std::max(floor_blocks, affordable), std::max<std::size_t>(row.n_chunks, 1));
    row.n_block = std::max<std::size_t>(row.n_block, 1);
    row.waste_rate = waste_rate(layout);
    row.replaced_bytes = row.n_chunks == 0 ? 0 : replaced_bytes(ctrace, row.n_block, chunk_length, precision);
    return row;
}

/// Picks the chunk length whose simulated step replaces the fewest bytes in
/// rCache; ties go to lower waste, then to the smaller length.
inline ChunkSearch search_chunk_length(const ModelProfile& profile, const AccessTrace& trace,
                                       std::span<const Elements> candidates, Bytes provisional_budget,
                                       const PrecisionSpec& precision) {
    if (candidates.empty()) fail(ErrorKind::invalid_argument, "no candidate chunk lengths");
    const auto part = partition_multiuse(profile);
    ChunkSearch out;
    const ChunkCandidate* best = nullptr;
    out.candidates.reserve(candidates.size());
    for (auto c : candidates) {
        out.candidates.push_back(
            evaluate_chunk_length(part.single_use, trace, c, provisional_budget, precision));
    }
    for (const auto& row : out.candidates) {
        if (row.skipped) continue;
        if (!best || row.replaced_bytes < best->replaced_bytes ||
            (row.replaced_bytes == best->replaced_bytes &&
             (row.waste_rate < best->waste_rate ||
              (row.waste_rate == best->waste_rate && row.chunk_length < best->chunk_length)))) {
            best = &row;
        }
    }
    if (!best) {
        fail(ErrorKind::infeasible, "every candidate chunk length is smaller than the largest parameter");
    }
    out.chunk_length = best->chunk_length;
    return out;
}

// ---------------------------------------------------------------------------
// Plan

enum class PlanAction { extend_rcache, upload_chunk };

inline std::string_view to_string(PlanAction a) {
    return a == PlanAction::extend_rcache ? "extend_rcache" : "upload_chunk";
}

inline PlanAction parse_plan_action(std::string_view text) {
    if (text == "extend_rcache") return PlanAction::extend_rcache;
    if (text == "upload_chunk") return PlanAction::upload_chunk;
    fail(ErrorKind::parse, "unknown plan action '" + std::string(text) + "'");
}

struct Decision {
    PlanAction action = PlanAction::extend_rcache;
    double benefit = 0.0;
    Bytes budget_after = 0;
    std::optional<ChunkId> chunk;  // set for uploads

    friend bool operator==(const Decision&, const Decision&) = default;
};

struct Plan {
    int gpu_count = 1;
    PrecisionSpec precision;
    VelocityConvention velocity;
    Elements chunk_length = 0;
    std::size_t n_chunks = 0;
    std::size_t n_block = 0;
    std::size_t working_set_blocks = 0;
    std::vector<Device> chunk_homes;
    Bytes u_allowed = 0;
    bool budget_clamped = false;
    Elements shared_elements = 0;
    Bytes shared_strategy_bytes = 0;
    bool feasible = true;  // rCache covers the working set
    double benefit_i = 0.0;
    double benefit_j = 0.0;
    double waste_rate = 0.0;
    std::vector<Decision> decision_trace;
    std::optional<SimReport> estimates;
    std::vector<std::string> notes;

    std::size_t gpu_chunks() const {
        return static_cast<std::size_t>(std::count(chunk_homes.begin(), chunk_homes.end(), Device::gpu));
    }

    /// Per-GPU bytes committed by the plan: rCache blocks, uploaded chunks
    /// and the replicated/partitioned multi-use parameters.
    Bytes planned_bytes() const {
        return static_cast<Bytes>(n_block) * precision.compute_bytes * chunk_length +
               static_cast<Bytes>(gpu_chunks()) *
                   chunk_footprint(chunk_length, static_cast<std::uint64_t>(gpu_count), precision) +
               shared_strategy_bytes;
    }

    friend bool operator==(const Plan&, const Plan&) = default;
};

struct PlanOptions {
    BudgetSpec budget;
    std::optional<std::vector<Elements>> candidates;
    std::optional<int> gpus;  // plan for a subset of the profiled devices
    VelocityConvention velocity;
};

/// Multi-use parameters are kept ZeRO-2 style: replicated compute copy plus
/// a partitioned gradient and optimizer state.
inline Bytes shared_parameter_bytes(Elements shared_elements, std::uint64_t gpus,
                                    const PrecisionSpec& precision) {
    return precision.compute_bytes * shared_elements +
           ceil_div((precision.compute_bytes + precision.optimizer_state_bytes()) * shared_elements, gpus);
}

inline Plan build_plan(const ModelProfile& profile, const HardwareProfile& hw,
                       const PrecisionSpec& precision, const PlanOptions& options = {}) {
    validate(profile);
    validate(hw);
    precision.validate();
    options.budget.validate();

    Plan plan;
    plan.precision = precision;
    plan.velocity = options.velocity;
    plan.gpu_count = options.gpus.value_or(hw.gpu_count);
    if (plan.gpu_count < 1 || plan.gpu_count > hw.gpu_count) {
        fail(ErrorKind::invalid_argument, "gpus must be in [1, " + std::to_string(hw.gpu_count) + "]");
    }
    const auto n = static_cast<std::uint64_t>(plan.gpu_count);
    const auto& rates = hw.rates(plan.gpu_count);

    // (a) budget
    if (options.budget.u_allowed) {
        plan.u_allowed = *options.budget.u_allowed;
    } else {
        const auto am = allowed_memory(static_cast<double>(hw.gpu_capacity_bytes),
                                       static_cast<double>(profile.buffer_bytes),
                                       static_cast<double>(profile.activation_bytes),
                                       options.budget.f_alloc, options.budget.f_frag);
        plan.u_allowed = am.bytes;
        plan.budget_clamped = am.clamped;
        if (am.clamped) plan.notes.push_back("reserved buffers and activations exceed GPU capacity; budget clamped to 0");
    }

    // (b) multi-use parameters
    const auto trace = coarsen_graph(profile);
    const auto part = partition_multiuse(profile);
    plan.shared_elements = part.shared_elements;
    plan.shared_strategy_bytes = shared_parameter_bytes(part.shared_elements, n, precision);
    Bytes remaining = plan.u_allowed > plan.shared_strategy_bytes ? plan.u_allowed - plan.shared_strategy_bytes : 0;

    // (c) chunk length
    const auto candidates = options.candidates ? *options.candidates : default_candidate_grid(profile, plan.gpu_count);
    const auto search = search_chunk_length(profile, trace, candidates, remaining, precision);
    plan.chunk_length = search.chunk_length;
    plan.notes.push_back("chunk length searched with a provisional rCache budget of " +
                         std::to_string(remaining) + " bytes and no uploaded chunks");

    const auto layout = pack_chunks(part.single_use, plan.chunk_length);
    const auto ctrace = build_chunk_trace(trace, layout);
    plan.n_chunks = layout.n_chunks();
    plan.waste_rate = waste_rate(layout);
    plan.working_set_blocks = min_feasible_blocks(ctrace);
    plan.chunk_homes.assign(plan.n_chunks, Device::cpu);
    plan.benefit_i = benefit_I(plan.gpu_count, plan.chunk_length, hw, precision);
    plan.benefit_j = benefit_J(plan.gpu_count, plan.chunk_length, hw, precision, options.velocity);

    const Bytes block_bytes = precision.compute_bytes * plan.chunk_length;
    const Bytes upload_bytes = chunk_footprint(plan.chunk_length, n, precision);
    const Bytes working_set_bytes = static_cast<Bytes>(plan.working_set_blocks) * block_bytes;
    plan.notes.push_back("rCache floor is the working set of " + std::to_string(plan.working_set_blocks) +
                         " blocks (largest checkpointed function at chunk granularity)");

    // (d)/(e) working set first; if unaffordable, grow rCache as far as possible and stop.
    if (remaining < working_set_bytes) {
        plan.feasible = false;
        plan.n_block = std::max<std::size_t>(1, static_cast<std::size_t>(remaining / block_bytes));
        plan.notes.push_back("budget cannot cover the working set; all chunks stay on CPU");
        return plan;
    }
    plan.n_block = plan.working_set_blocks;
    remaining -= working_set_bytes;

    // (f) greedy allocation; benefits are constant for a fixed C, so each
    // action class is exhausted before the other.
    auto upload_phase = [&] {
        for (ChunkId c = 0; c < plan.n_chunks && remaining >= upload_bytes; ++c) {
            plan.chunk_homes[c] = Device::gpu;
            remaining -= upload_bytes;
            plan.decision_trace.push_back({PlanAction::upload_chunk, plan.benefit_j, remaining, c});
        }
    };
    auto extend_phase = [&] {
        while (plan.n_block < plan.n_chunks && remaining >= block_bytes) {
            ++plan.n_block;
            remaining -= block_bytes;
            plan.decision_trace.push_back({PlanAction::extend_rcache, plan.benefit_i, remaining, std::nullopt});
        }
    };
    if (plan.benefit_j > plan.benefit_i) {
        upload_phase();
        extend_phase();
    } else {
        extend_phase();
        upload_phase();
    }

    // (g) estimates under the final configuration
    CacheConfig cfg;
    cfg.n_block = plan.n_block;
    cfg.chunk_length = plan.chunk_length;
    cfg.placement = plan.chunk_homes;
    cfg.precision = precision;
    cfg.gpu_count = plan.gpu_count;
    cfg.rates = rates;
    cfg.velocity = options.velocity;
    plan.estimates = simulate(ctrace, cfg);
    return plan;
}

}  // namespace chunkplan
