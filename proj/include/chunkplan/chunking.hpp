#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "chunkplan/access_trace.hpp"
#include "chunkplan/error.hpp"
#include "chunkplan/model_profile.hpp"
#include "chunkplan/units.hpp"

namespace chunkplan {

struct ChunkMember {
    std::string param_id;
    Elements offset = 0;
    Elements numel = 0;

    friend bool operator==(const ChunkMember&, const ChunkMember&) = default;
};

struct Chunk {
    ChunkId id = 0;
    Elements length = 0;
    std::vector<ChunkMember> members;
    Elements used_elements = 0;

    friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct ChunkLayout {
    Elements chunk_length = 0;
    std::vector<Chunk> chunks;
    std::unordered_map<std::string, ChunkId> param_to_chunk;
    Elements total_elements = 0;
    Elements aggregate_length = 0;  // n_chunks * chunk_length

    std::size_t n_chunks() const { return chunks.size(); }
};

/// Chunk-level view of one training step. `backward` is `forward` reversed;
/// `reduce_after[c]` is the backward index after which chunk c holds only
/// finished gradients and can be reduce-scattered.
struct ChunkTrace {
    std::vector<std::vector<ChunkId>> forward;
    std::vector<std::vector<ChunkId>> backward;
    std::vector<std::size_t> reduce_after;

    std::size_t n_chunks() const { return reduce_after.size(); }

    friend bool operator==(const ChunkTrace&, const ChunkTrace&) = default;
};

struct MultiUsePartition {
    Elements shared_elements = 0;
    std::vector<ParameterSpec> single_use;
};

/// Splits off multi-use parameters and orders the rest by first forward use.
/// Parameters first read by the same operator keep declaration order.
inline MultiUsePartition partition_multiuse(const ModelProfile& profile) {
    std::unordered_map<std::string, std::size_t> decl_index;
    for (std::size_t i = 0; i < profile.parameters.size(); ++i) {
        decl_index.emplace(profile.parameters[i].id, i);
    }
    constexpr auto unused = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> first_use(profile.parameters.size(), unused);
    for (std::size_t op = 0; op < profile.operators.size(); ++op) {
        for (const auto& pid : profile.operators[op].param_ids) {
            auto it = decl_index.find(pid);
            if (it == decl_index.end()) {
                fail(ErrorKind::validation, "operator references unknown parameter '" + pid + "'");
            }
            first_use[it->second] = std::min(first_use[it->second], op);
        }
    }

    MultiUsePartition out;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < profile.parameters.size(); ++i) {
        const auto& p = profile.parameters[i];
        if (p.shared) {
            out.shared_elements += p.numel;
        } else {
            order.push_back(i);
        }
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return first_use[a] < first_use[b]; });
    out.single_use.reserve(order.size());
    for (auto i : order) out.single_use.push_back(profile.parameters[i]);
    return out;
}

/// Greedy in-order grouping: a parameter joins the open chunk if it fits,
/// otherwise the chunk is closed and a fresh one opened. Parameters never
/// straddle chunks.
inline ChunkLayout pack_chunks(std::span<const ParameterSpec> sequence, Elements chunk_length) {
    if (chunk_length < 1) fail(ErrorKind::invalid_argument, "chunk length must be >= 1");
    ChunkLayout layout;
    layout.chunk_length = chunk_length;
    for (const auto& p : sequence) {
        if (p.numel > chunk_length) {
            fail(ErrorKind::chunk_too_small, "chunk length " + std::to_string(chunk_length) +
                                                 " is smaller than parameter '" + p.id + "' (" +
                                                 std::to_string(p.numel) + " elements)");
        }
        if (layout.chunks.empty() || layout.chunks.back().used_elements + p.numel > chunk_length) {
            Chunk fresh;
            fresh.id = static_cast<ChunkId>(layout.chunks.size());
            fresh.length = chunk_length;
            layout.chunks.push_back(std::move(fresh));
        }
        auto& chunk = layout.chunks.back();
        chunk.members.push_back({p.id, chunk.used_elements, p.numel});
        chunk.used_elements += p.numel;
        layout.param_to_chunk[p.id] = chunk.id;
        layout.total_elements += p.numel;
    }
    layout.aggregate_length = static_cast<Elements>(layout.chunks.size()) * chunk_length;
    return layout;
}

inline double waste_rate(const ChunkLayout& layout) {
    if (layout.aggregate_length == 0) return 0.0;
    return static_cast<double>(layout.aggregate_length - layout.total_elements) /
           static_cast<double>(layout.aggregate_length);
}

/// Completes a chunk trace from its forward node sets: backward is the exact
/// reverse, and each chunk is reduced after its last backward access.
inline ChunkTrace chunk_trace_from_forward(std::vector<std::vector<ChunkId>> forward,
                                           std::size_t n_chunks) {
    ChunkTrace out;
    out.forward = std::move(forward);
    for (auto& ids : out.forward) {
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        for (auto c : ids) {
            if (c >= n_chunks) {
                fail(ErrorKind::consistency, "chunk id " + std::to_string(c) + " out of range");
            }
        }
    }
    out.backward.assign(out.forward.rbegin(), out.forward.rend());

    constexpr auto unset = std::numeric_limits<std::size_t>::max();
    out.reduce_after.assign(n_chunks, unset);
    for (std::size_t pos = 0; pos < out.backward.size(); ++pos) {
        for (auto c : out.backward[pos]) out.reduce_after[c] = pos;
    }
    for (std::size_t c = 0; c < out.reduce_after.size(); ++c) {
        if (out.reduce_after[c] == unset) {
            fail(ErrorKind::consistency,
                 "chunk " + std::to_string(c) + " is never accessed by the trace");
        }
    }
    return out;
}

inline ChunkTrace build_chunk_trace(const AccessTrace& trace, const ChunkLayout& layout) {
    std::vector<std::vector<ChunkId>> forward;
    forward.reserve(trace.coarse_ops.size());
    for (const auto& node : trace.coarse_ops) {
        std::vector<ChunkId> ids;
        for (const auto& pid : node) {
            auto it = layout.param_to_chunk.find(pid);
            if (it == layout.param_to_chunk.end()) {
                fail(ErrorKind::consistency, "parameter '" + pid + "' is not mapped to any chunk");
            }
            ids.push_back(it->second);
        }
        forward.push_back(std::move(ids));
    }
    return chunk_trace_from_forward(std::move(forward), layout.n_chunks());
}

}  // namespace chunkplan
