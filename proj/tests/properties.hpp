#pragma once

// Randomized property checks shared by the unit suites and the acceptance
// runner. Each returns the number of instances checked, or the first
// counterexample.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "chunkplan/access_trace.hpp"
#include "chunkplan/chunking.hpp"
#include "chunkplan/oracle.hpp"
#include "chunkplan/rcache_sim.hpp"
#include "chunkplan/search.hpp"
#include "test_support.hpp"

namespace chunkplan::testing {

struct PropertyResult {
    std::size_t instances = 0;
    std::optional<std::string> failure;

    bool ok() const { return !failure.has_value(); }
};

namespace detail {

template <class... Parts>
std::string describe(const Parts&... parts) {
    std::ostringstream ss;
    (ss << ... << parts);
    return ss.str();
}

struct Packed {
    ModelProfile profile;
    AccessTrace trace;
    std::vector<ParameterSpec> sequence;
    ChunkLayout layout;
    ChunkTrace chunks;
};

inline Packed random_packed(Rng& rng) {
    Packed p;
    p.profile = random_profile(rng);
    p.trace = coarsen_graph(p.profile);
    p.sequence = partition_multiuse(p.profile).single_use;
    Elements max_numel = 1;
    Elements total = 0;
    for (const auto& s : p.sequence) {
        max_numel = std::max(max_numel, s.numel);
        total += s.numel;
    }
    const Elements c = uniform(rng, max_numel, std::max(max_numel, total));
    p.layout = pack_chunks(p.sequence, c);
    p.chunks = build_chunk_trace(p.trace, p.layout);
    return p;
}

inline PrecisionSpec random_precision(Rng& rng) {
    const std::uint64_t widths[] = {1, 2, 4, 8};
    return {widths[uniform(rng, 0, 3)], widths[uniform(rng, 0, 3)], uniform(rng, 1, 4)};
}

}  // namespace detail

/// Belady replacement reaches the exhaustive minimum miss count.
inline PropertyResult check_belady_optimality(std::uint64_t seed, std::size_t traces) {
    Rng rng(seed);
    PropertyResult r;
    for (std::size_t i = 0; i < traces; ++i) {
        const std::size_t distinct = uniform(rng, 1, 8);
        const std::size_t len = uniform(rng, 1, 16);
        std::vector<ChunkId> seq;
        for (std::size_t k = 0; k < len; ++k) seq.push_back(static_cast<ChunkId>(uniform(rng, 0, distinct - 1)));
        for (std::size_t n_block = 1; n_block <= 8; ++n_block) {
            const auto sim = count_misses(seq, n_block).misses;
            const auto best = oracle_min_misses(seq, n_block);
            if (sim != best) {
                std::ostringstream ss;
                ss << "trace [";
                for (auto c : seq) ss << c << ' ';
                ss << "] n_block=" << n_block << ": simulate=" << sim << " oracle=" << best;
                r.failure = ss.str();
                return r;
            }
        }
        ++r.instances;
    }
    return r;
}

/// Concatenated chunk members reproduce the input order with no loss.
inline PropertyResult check_packing_invariants(std::uint64_t seed, std::size_t instances) {
    Rng rng(seed);
    PropertyResult r;
    for (std::size_t i = 0; i < instances; ++i) {
        const auto p = detail::random_packed(rng);
        std::vector<std::string> order;
        Elements used = 0;
        Elements input = 0;
        for (const auto& s : p.sequence) input += s.numel;
        for (const auto& chunk : p.layout.chunks) {
            Elements cursor = 0;
            for (const auto& m : chunk.members) {
                if (m.offset != cursor) {
                    r.failure = detail::describe("member ", m.param_id, " not packed left-to-right");
                    return r;
                }
                cursor += m.numel;
                order.push_back(m.param_id);
                if (p.layout.param_to_chunk.at(m.param_id) != chunk.id) {
                    r.failure = detail::describe("param_to_chunk disagrees for ", m.param_id);
                    return r;
                }
            }
            if (cursor != chunk.used_elements || chunk.used_elements > chunk.length) {
                r.failure = detail::describe("chunk ", chunk.id, " used_elements inconsistent");
                return r;
            }
            used += chunk.used_elements;
        }
        std::vector<std::string> expected;
        for (const auto& s : p.sequence) expected.push_back(s.id);
        if (order != expected) {
            r.failure = "packing changed parameter order";
            return r;
        }
        if (used != input || p.layout.total_elements != input ||
            p.layout.aggregate_length < p.layout.total_elements ||
            p.layout.aggregate_length != p.layout.n_chunks() * p.layout.chunk_length) {
            r.failure = detail::describe("element accounting off: used=", used, " input=", input);
            return r;
        }
        ++r.instances;
    }
    return r;
}

/// Backward is forward reversed and each chunk reduces at its last backward use.
inline PropertyResult check_trace_reversal(std::uint64_t seed, std::size_t instances) {
    Rng rng(seed);
    PropertyResult r;
    for (std::size_t i = 0; i < instances; ++i) {
        const auto p = detail::random_packed(rng);
        const auto& t = p.chunks;
        if (t.backward.size() != t.forward.size()) {
            r.failure = "backward length differs from forward";
            return r;
        }
        for (std::size_t k = 0; k < t.forward.size(); ++k) {
            if (t.backward[k] != t.forward[t.forward.size() - 1 - k]) {
                r.failure = detail::describe("backward[", k, "] is not forward reversed");
                return r;
            }
        }
        for (ChunkId c = 0; c < p.layout.n_chunks(); ++c) {
            std::size_t last = SIZE_MAX;
            for (std::size_t k = 0; k < t.backward.size(); ++k) {
                if (std::find(t.backward[k].begin(), t.backward[k].end(), c) != t.backward[k].end()) last = k;
            }
            if (last == SIZE_MAX || t.reduce_after.at(c) != last) {
                r.failure = detail::describe("reduce_after[", c, "] wrong");
                return r;
            }
        }
        ++r.instances;
    }
    return r;
}

/// Growing the rCache never increases gathered or replaced bytes.
inline PropertyResult check_replaced_monotone(std::uint64_t seed, std::size_t instances) {
    Rng rng(seed);
    PropertyResult r;
    for (std::size_t i = 0; i < instances; ++i) {
        const auto p = detail::random_packed(rng);
        const auto precision = detail::random_precision(rng);
        Bytes prev_replaced = ~Bytes{0};
        Bytes prev_gather = ~Bytes{0};
        for (std::size_t nb = min_feasible_blocks(p.chunks); nb <= p.layout.n_chunks() + 1; ++nb) {
            CacheConfig cfg;
            cfg.n_block = nb;
            cfg.chunk_length = p.layout.chunk_length;
            cfg.placement.assign(p.layout.n_chunks(), Device::gpu);
            cfg.precision = precision;
            const auto rep = simulate(p.chunks, cfg);
            if (rep.replaced_bytes > prev_replaced || rep.gather_bytes > prev_gather) {
                r.failure = detail::describe("replaced/gathered bytes grew at n_block=", nb);
                return r;
            }
            if (rep.replaced_bytes != replaced_bytes(p.chunks, nb, p.layout.chunk_length, precision)) {
                r.failure = "replaced_bytes disagrees with simulate";
                return r;
            }
            prev_replaced = rep.replaced_bytes;
            prev_gather = rep.gather_bytes;
        }
        ++r.instances;
    }
    return r;
}

/// n_block = n_chunks gives exactly 2*L_c*S of GPU-GPU volume; every smaller
/// feasible rCache stays inside [2*L_c*S, 4*L_c*S].
inline PropertyResult check_limiting_cases(std::uint64_t seed, std::size_t instances) {
    Rng rng(seed);
    PropertyResult r;
    for (std::size_t i = 0; i < instances; ++i) {
        const auto p = detail::random_packed(rng);
        const auto precision = detail::random_precision(rng);
        const Bytes lcs = precision.compute_bytes * p.layout.aggregate_length;
        for (std::size_t nb = min_feasible_blocks(p.chunks); nb <= p.layout.n_chunks(); ++nb) {
            CacheConfig cfg;
            cfg.n_block = nb;
            cfg.chunk_length = p.layout.chunk_length;
            cfg.placement.assign(p.layout.n_chunks(), Device::gpu);
            cfg.precision = precision;
            const auto rep = simulate(p.chunks, cfg);
            const Bytes volume = rep.gather_bytes + rep.reduce_bytes;
            if (nb == p.layout.n_chunks() && volume != 2 * lcs) {
                r.failure = detail::describe("rCache-max volume ", volume, " != 2*L_c*S = ", 2 * lcs);
                return r;
            }
            if (volume < 2 * lcs || volume > 4 * lcs) {
                r.failure = detail::describe("volume ", volume, " outside [", 2 * lcs, ", ", 4 * lcs,
                                             "] at n_block=", nb);
                return r;
            }
            if (rep.gather_ops < p.layout.n_chunks() || rep.reduce_ops != p.layout.n_chunks()) {
                r.failure = "conservation violated";
                return r;
            }
        }
        ++r.instances;
    }
    return r;
}

/// Plans never commit more than the budget; the rCache covers the working
/// set whenever the budget does; estimates stay inside the rCache-max/rCache-min traffic envelope.
inline PropertyResult check_budget_respect(std::uint64_t seed, std::size_t instances) {
    Rng rng(seed);
    PropertyResult r;
    for (std::size_t i = 0; i < instances; ++i) {
        const auto profile = random_profile(rng);
        const auto hw = random_hardware(rng);
        const auto precision = detail::random_precision(rng);
        PlanOptions opts;
        const Elements total = profile.total_elements();
        opts.budget.u_allowed = uniform(rng, 0, 20 * total * precision.compute_bytes + 64);
        const auto plan = build_plan(profile, hw, precision, opts);
        const Bytes block = precision.compute_bytes * plan.chunk_length;
        const Bytes after_shared =
            plan.u_allowed > plan.shared_strategy_bytes ? plan.u_allowed - plan.shared_strategy_bytes : 0;
        const bool ws_affordable = after_shared >= plan.working_set_blocks * block;
        if (ws_affordable != plan.feasible) {
            r.failure = "feasibility flag disagrees with the working-set budget";
            return r;
        }
        if (plan.feasible) {
            if (plan.planned_bytes() > plan.u_allowed) {
                r.failure = detail::describe("planned ", plan.planned_bytes(), " > budget ", plan.u_allowed);
                return r;
            }
            if (plan.n_block < plan.working_set_blocks) {
                r.failure = "rCache below working set although affordable";
                return r;
            }
            const Bytes lcs = precision.compute_bytes * plan.n_chunks * plan.chunk_length;
            const Bytes volume = plan.estimates->g2g_bytes();
            if (volume < 2 * lcs || volume > 4 * lcs) {
                r.failure = "plan estimates outside the [2 L_c S, 4 L_c S] envelope";
                return r;
            }
        } else if (plan.n_block < 1 || plan.gpu_chunks() != 0 || !plan.decision_trace.empty()) {
            r.failure = "fallback plan must keep every chunk on CPU with n_block >= 1";
            return r;
        }
        ++r.instances;
    }
    return r;
}

/// sign(J - I) does not depend on the chunk length.
inline PropertyResult check_decision_scale_invariance(std::uint64_t seed, std::size_t instances) {
    Rng rng(seed);
    PropertyResult r;
    for (std::size_t i = 0; i < instances; ++i) {
        const auto hw = random_hardware(rng);
        const auto precision = detail::random_precision(rng);
        auto it = hw.tables.begin();
        std::advance(it, static_cast<long>(uniform(rng, 0, hw.tables.size() - 1)));
        const int n = it->first;
        const Elements base = uniform(rng, 1, 1'000'000);
        const double d0 = benefit_J(n, base, hw, precision) - benefit_I(n, base, hw, precision);
        for (int k = 0; k < 4; ++k) {
            const Elements c = uniform(rng, 1, 10'000'000'000ull);
            const double j = benefit_J(n, c, hw, precision);
            const double ii = benefit_I(n, c, hw, precision);
            const double d = j - ii;
            const double scale = std::max(std::abs(j), std::abs(ii));
            if (std::abs(d) <= 1e-9 * scale || std::abs(d0) <= 1e-9 * scale) continue;
            if ((d > 0) != (d0 > 0)) {
                r.failure = detail::describe("decision flips between C=", base, " and C=", c);
                return r;
            }
        }
        ++r.instances;
    }
    return r;
}

/// More budget never shrinks the rCache or the set of uploaded chunks
/// (chunk length held fixed).
inline PropertyResult check_monotone_budget(std::uint64_t seed, std::size_t instances) {
    Rng rng(seed);
    PropertyResult r;
    for (std::size_t i = 0; i < instances; ++i) {
        const auto profile = random_profile(rng);
        const auto hw = random_hardware(rng);
        const auto precision = detail::random_precision(rng);
        const auto seq = partition_multiuse(profile).single_use;
        Elements max_numel = 1;
        Elements total = 0;
        for (const auto& s : seq) {
            max_numel = std::max(max_numel, s.numel);
            total += s.numel;
        }
        PlanOptions opts;
        opts.candidates = std::vector<Elements>{uniform(rng, max_numel, std::max(max_numel, total))};
        std::vector<Bytes> budgets;
        for (int k = 0; k < 6; ++k) budgets.push_back(uniform(rng, 0, 20 * total * precision.compute_bytes + 64));
        std::sort(budgets.begin(), budgets.end());
        std::size_t prev_blocks = 0;
        std::size_t prev_gpu = 0;
        for (auto b : budgets) {
            opts.budget.u_allowed = b;
            const auto plan = build_plan(profile, hw, precision, opts);
            if (plan.n_block < prev_blocks || plan.gpu_chunks() < prev_gpu) {
                r.failure = detail::describe("plan shrank when budget grew to ", b);
                return r;
            }
            prev_blocks = plan.n_block;
            prev_gpu = plan.gpu_chunks();
        }
        ++r.instances;
    }
    return r;
}

}  // namespace chunkplan::testing
