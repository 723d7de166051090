#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "chunkplan/error.hpp"
#include "chunkplan/model_profile.hpp"

namespace chunkplan {

/// Coarse-grained forward access order. Each checkpointed function is one
/// node; operators outside any checkpoint are their own node. Shared
/// parameters are pulled out into `shared_param_ids`.
struct AccessTrace {
    std::vector<std::vector<std::string>> coarse_ops;
    std::vector<std::string> shared_param_ids;

    friend bool operator==(const AccessTrace&, const AccessTrace&) = default;
};

/// Collapses checkpointed functions so that every non-shared parameter is
/// touched by exactly one coarse node. Nodes left with no parameters (after
/// removing shared ones) are dropped: they never touch a chunk.
inline AccessTrace coarsen_graph(const ModelProfile& profile) {
    std::unordered_map<std::string, const ParameterSpec*> by_id;
    for (const auto& p : profile.parameters) by_id.emplace(p.id, &p);

    AccessTrace trace;
    for (const auto& p : profile.parameters) {
        if (p.shared) trace.shared_param_ids.push_back(p.id);
    }

    // Group slot for each ac_group, in order of the group's first operator.
    std::map<std::int64_t, std::size_t> group_slot;
    std::vector<std::vector<std::string>> nodes;
    std::vector<std::unordered_set<std::string>> node_members;

    for (const auto& op : profile.operators) {
        std::size_t slot = 0;
        if (op.ac_group) {
            auto [it, inserted] = group_slot.try_emplace(*op.ac_group, nodes.size());
            if (inserted) {
                nodes.emplace_back();
                node_members.emplace_back();
            }
            slot = it->second;
        } else {
            slot = nodes.size();
            nodes.emplace_back();
            node_members.emplace_back();
        }
        for (const auto& pid : op.param_ids) {
            auto found = by_id.find(pid);
            if (found == by_id.end()) {
                fail(ErrorKind::validation,
                     "operator '" + op.name + "' references unknown parameter '" + pid + "'");
            }
            if (found->second->shared) continue;
            if (node_members[slot].insert(pid).second) nodes[slot].push_back(pid);
        }
    }

    std::unordered_map<std::string, std::size_t> owner;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].empty()) continue;
        const std::size_t coarse_index = trace.coarse_ops.size();
        for (const auto& pid : nodes[i]) {
            if (!owner.emplace(pid, coarse_index).second) {
                fail(ErrorKind::uncommon_graph,
                     "parameter '" + pid +
                         "' is read by more than one coarse operator; mark it shared=true");
            }
        }
        trace.coarse_ops.push_back(std::move(nodes[i]));
    }
    return trace;
}

/// Largest total element count touched by any single coarse node.
inline Elements ac_buffer_size(const AccessTrace& trace, const ModelProfile& profile) {
    std::unordered_map<std::string, Elements> numel;
    for (const auto& p : profile.parameters) numel.emplace(p.id, p.numel);
    Elements best = 0;
    for (const auto& node : trace.coarse_ops) {
        Elements sum = 0;
        for (const auto& pid : node) {
            auto it = numel.find(pid);
            if (it == numel.end()) {
                fail(ErrorKind::consistency, "trace parameter '" + pid + "' is not in the profile");
            }
            sum += it->second;
        }
        best = std::max(best, sum);
    }
    return best;
}

}  // namespace chunkplan
