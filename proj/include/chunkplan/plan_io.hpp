#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "chunkplan/profile_io.hpp"
#include "chunkplan/rcache_sim.hpp"
#include "chunkplan/search.hpp"

namespace chunkplan {

inline json to_json(const SimReport& r) {
    return {
        {"gather_ops", r.gather_ops},
        {"gather_bytes", r.gather_bytes},
        {"reduce_ops", r.reduce_ops},
        {"reduce_bytes", r.reduce_bytes},
        {"g2c_bytes", r.g2c_bytes},
        {"c2g_bytes", r.c2g_bytes},
        {"g2c_shard_bytes", r.g2c_shard_bytes},
        {"c2g_shard_bytes", r.c2g_shard_bytes},
        {"evictions", r.evictions},
        {"replaced_bytes", r.replaced_bytes},
        {"peak_rcache_blocks", r.peak_rcache_blocks},
        {"estimated_offload_seconds", r.estimated_offload_seconds},
        {"estimated_update_seconds", r.estimated_update_seconds},
    };
}

inline SimReport sim_report_from_json(const json& obj, const std::string& path) {
    using namespace detail;
    SimReport r;
    r.gather_ops = get_uint(obj, "gather_ops", path);
    r.gather_bytes = get_uint(obj, "gather_bytes", path);
    r.reduce_ops = get_uint(obj, "reduce_ops", path);
    r.reduce_bytes = get_uint(obj, "reduce_bytes", path);
    r.g2c_bytes = get_uint(obj, "g2c_bytes", path);
    r.c2g_bytes = get_uint(obj, "c2g_bytes", path);
    r.g2c_shard_bytes = get_uint(obj, "g2c_shard_bytes", path);
    r.c2g_shard_bytes = get_uint(obj, "c2g_shard_bytes", path);
    r.evictions = get_uint(obj, "evictions", path);
    r.replaced_bytes = get_uint(obj, "replaced_bytes", path);
    r.peak_rcache_blocks = get_uint(obj, "peak_rcache_blocks", path);
    r.estimated_offload_seconds = get_number(obj, "estimated_offload_seconds", path);
    r.estimated_update_seconds = get_number(obj, "estimated_update_seconds", path);
    return r;
}

/// Plan document. `meta` is a sidecar for provenance (timestamps, tool
/// version); it is written on request and ignored when loading.
inline json to_json(const Plan& plan) {
    json homes = json::object();
    for (std::size_t c = 0; c < plan.chunk_homes.size(); ++c) {
        homes[std::to_string(c)] = std::string(to_string(plan.chunk_homes[c]));
    }
    json trace = json::array();
    for (const auto& d : plan.decision_trace) {
        json entry = {{"action", std::string(to_string(d.action))},
                      {"benefit", d.benefit},
                      {"budget_after", d.budget_after}};
        if (d.chunk) entry["chunk"] = *d.chunk;
        trace.push_back(std::move(entry));
    }
    return {
        {"format_version", kFormatVersion},
        {"gpu_count", plan.gpu_count},
        {"precision",
         {{"compute_bytes", plan.precision.compute_bytes},
          {"optimizer_bytes", plan.precision.optimizer_bytes},
          {"optimizer_factor", plan.precision.optimizer_factor}}},
        {"velocity_element_bytes",
         plan.velocity.element_bytes ? json(*plan.velocity.element_bytes) : json(nullptr)},
        {"chunk_length", plan.chunk_length},
        {"n_chunks", plan.n_chunks},
        {"n_block", plan.n_block},
        {"working_set_blocks", plan.working_set_blocks},
        {"chunk_homes", std::move(homes)},
        {"u_allowed", plan.u_allowed},
        {"budget_clamped", plan.budget_clamped},
        {"shared_elements", plan.shared_elements},
        {"shared_strategy_bytes", plan.shared_strategy_bytes},
        {"feasible", plan.feasible},
        {"benefit_i", plan.benefit_i},
        {"benefit_j", plan.benefit_j},
        {"waste_rate", plan.waste_rate},
        {"decision_trace", std::move(trace)},
        {"estimates", plan.estimates ? to_json(*plan.estimates) : json(nullptr)},
        {"notes", plan.notes},
    };
}

inline Plan plan_from_json(const json& doc) {
    using namespace detail;
    check_version(doc, "plan");
    Plan plan;
    const auto gpus = get_uint(doc, "gpu_count", "");
    if (gpus < 1 || gpus > (1u << 20)) fail(ErrorKind::parse, "field 'gpu_count' out of range");
    plan.gpu_count = static_cast<int>(gpus);
    const auto& prec = field(doc, "precision", "");
    plan.precision.compute_bytes = get_uint(prec, "compute_bytes", "precision");
    plan.precision.optimizer_bytes = get_uint(prec, "optimizer_bytes", "precision");
    plan.precision.optimizer_factor = get_uint(prec, "optimizer_factor", "precision");
    try {
        plan.precision.validate();
    } catch (const Error& e) {
        fail(ErrorKind::validation, std::string("plan: ") + e.what());
    }
    const auto& vel = field(doc, "velocity_element_bytes", "");
    if (vel.is_number()) {
        plan.velocity.element_bytes = vel.get<double>();
    } else if (!vel.is_null()) {
        fail(ErrorKind::parse, "field 'velocity_element_bytes' must be a number or null");
    }
    plan.chunk_length = get_uint(doc, "chunk_length", "");
    plan.n_chunks = get_uint(doc, "n_chunks", "");
    plan.n_block = get_uint(doc, "n_block", "");
    plan.working_set_blocks = get_uint(doc, "working_set_blocks", "");
    const auto& homes = field(doc, "chunk_homes", "");
    if (!homes.is_object()) fail(ErrorKind::parse, "field 'chunk_homes' must be an object");
    plan.chunk_homes.assign(plan.n_chunks, Device::cpu);
    if (homes.size() != plan.n_chunks) {
        fail(ErrorKind::validation, "chunk_homes has " + std::to_string(homes.size()) +
                                        " entries but n_chunks is " + std::to_string(plan.n_chunks));
    }
    for (const auto& [key, value] : homes.items()) {
        std::size_t id = 0;
        try {
            std::size_t used = 0;
            id = std::stoul(key, &used);
            if (used != key.size()) throw std::invalid_argument(key);
        } catch (const std::exception&) {
            fail(ErrorKind::parse, "field 'chunk_homes." + key + "': key must be a chunk id");
        }
        if (id >= plan.n_chunks) fail(ErrorKind::validation, "chunk_homes." + key + ": id out of range");
        if (!value.is_string()) fail(ErrorKind::parse, "field 'chunk_homes." + key + "' must be a string");
        plan.chunk_homes[id] = parse_device(value.get<std::string>());
    }
    plan.u_allowed = get_uint(doc, "u_allowed", "");
    plan.budget_clamped = get_bool(doc, "budget_clamped", "");
    plan.shared_elements = get_uint(doc, "shared_elements", "");
    plan.shared_strategy_bytes = get_uint(doc, "shared_strategy_bytes", "");
    plan.feasible = get_bool(doc, "feasible", "");
    plan.benefit_i = get_number(doc, "benefit_i", "");
    plan.benefit_j = get_number(doc, "benefit_j", "");
    plan.waste_rate = get_number(doc, "waste_rate", "");
    const auto& trace = get_array(doc, "decision_trace", "");
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const std::string path = "decision_trace[" + std::to_string(i) + "]";
        Decision d;
        d.action = parse_plan_action(get_string(trace[i], "action", path));
        d.benefit = get_number(trace[i], "benefit", path);
        d.budget_after = get_uint(trace[i], "budget_after", path);
        if (trace[i].contains("chunk")) {
            const auto c = get_uint(trace[i], "chunk", path);
            if (c >= plan.n_chunks) fail(ErrorKind::validation, path + ".chunk out of range");
            d.chunk = static_cast<ChunkId>(c);
        }
        plan.decision_trace.push_back(d);
    }
    const auto& est = field(doc, "estimates", "");
    if (!est.is_null()) plan.estimates = sim_report_from_json(est, "estimates");
    const auto& notes = get_array(doc, "notes", "");
    for (const auto& note : notes) {
        if (!note.is_string()) fail(ErrorKind::parse, "field 'notes' must hold strings");
        plan.notes.push_back(note.get<std::string>());
    }
    if (plan.n_block < 1) fail(ErrorKind::validation, "plan n_block must be >= 1");
    if (plan.chunk_length < 1) fail(ErrorKind::validation, "plan chunk_length must be >= 1");
    return plan;
}

inline Plan load_plan(std::string_view text) { return plan_from_json(detail::parse_json(text, "plan")); }

inline std::string serialize(const Plan& plan) { return to_json(plan).dump(2); }

}  // namespace chunkplan
