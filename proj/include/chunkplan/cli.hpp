#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "chunkplan/cost_model.hpp"
#include "chunkplan/error.hpp"
#include "chunkplan/plan_io.hpp"
#include "chunkplan/profile_io.hpp"
#include "chunkplan/rcache_sim.hpp"
#include "chunkplan/search.hpp"

namespace chunkplan::cli {

enum class Command { gen_profile, plan, simulate, compare, sweep };

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitInfeasible = 2;

inline constexpr Elements kDefaultCompareChunk = 64ull << 20;

struct RunConfig {
    Command command = Command::plan;

    // gen-profile
    std::string preset;
    std::uint64_t hidden = 0;
    std::uint64_t layers = 0;
    std::uint64_t heads = 0;
    std::uint64_t vocab = kDefaultVocab;
    std::uint64_t seq_len = kDefaultSeqLen;
    std::uint64_t batch = kDefaultBatch;

    // inputs / outputs
    std::string model_path;
    std::string hardware_path;
    std::string plan_path;
    std::string output_path;  // empty: stdout

    // overrides
    std::optional<int> gpus;
    double f_alloc = 0.95;
    double f_frag = 1.25;
    std::optional<Bytes> u_allowed;
    std::optional<std::vector<Elements>> candidates;
    PrecisionSpec precision;
    std::optional<double> velocity_element_bytes;
    bool allow_fallback = false;

    // compare
    Elements model_elements = 0;
    std::optional<Elements> aggregate_elements;
    std::optional<Elements> chunk_length;
    std::optional<Bytes> epsilon;
};

namespace detail {

inline std::string read_file(const std::string& path, const char* what) {
    if (path.empty()) fail(ErrorKind::invalid_argument, std::string("missing ") + what + " path");
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::invalid_argument, std::string("cannot read ") + what + " '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_output(const std::string& path, const std::string& content, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << content;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorKind::invalid_argument, "cannot write '" + path + "'");
    f << content;
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

inline json meta_block() { return {{"generated_at", utc_timestamp()}, {"tool", "chunkplan"}}; }

inline std::string human_bytes(double bytes) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(3) << bytes / 1e9 << " GB";
    return ss.str();
}

inline PlanOptions plan_options(const RunConfig& cfg) {
    PlanOptions o;
    o.budget.f_alloc = cfg.f_alloc;
    o.budget.f_frag = cfg.f_frag;
    o.budget.u_allowed = cfg.u_allowed;
    o.candidates = cfg.candidates;
    o.gpus = cfg.gpus;
    o.velocity.element_bytes = cfg.velocity_element_bytes;
    return o;
}

inline void print_plan_summary(const Plan& plan, const ModelProfile& model, std::ostream& out) {
    const auto n = static_cast<std::uint64_t>(plan.gpu_count);
    const Bytes rcache = static_cast<Bytes>(plan.n_block) * plan.precision.compute_bytes * plan.chunk_length;
    const Bytes uploaded = plan.gpu_chunks() * chunk_footprint(plan.chunk_length, n, plan.precision);
    out << "model            " << model.name << " (" << model.total_elements() << " elements)\n";
    out << "gpus             " << plan.gpu_count << "\n";
    out << "budget           " << human_bytes(static_cast<double>(plan.u_allowed))
        << (plan.budget_clamped ? " (clamped)" : "") << "\n";
    out << "chunk length     " << plan.chunk_length << " elements, " << plan.n_chunks
        << " chunks, waste " << std::setprecision(4) << plan.waste_rate * 100.0 << "%\n";
    out << "rCache           " << plan.n_block << " blocks (working set " << plan.working_set_blocks << ")\n";
    out << "chunks on GPU    " << plan.gpu_chunks() << " / " << plan.n_chunks << "\n";
    out << "benefit I / J    " << std::setprecision(6) << plan.benefit_i << " / " << plan.benefit_j
        << (plan.benefit_j > plan.benefit_i ? "  -> upload first" : "  -> extend rCache first") << "\n";
    out << "memory per GPU\n";
    out << "  rCache         " << human_bytes(static_cast<double>(rcache)) << "\n";
    out << "  uploaded       " << human_bytes(static_cast<double>(uploaded)) << "\n";
    out << "  multi-use      " << human_bytes(static_cast<double>(plan.shared_strategy_bytes)) << "\n";
    out << "  total          " << human_bytes(static_cast<double>(plan.planned_bytes())) << "\n";
    if (plan.estimates) {
        const auto& e = *plan.estimates;
        out << "communication per step\n";
        out << "  GPU-GPU        " << human_bytes(static_cast<double>(e.g2g_bytes())) << " ("
            << e.gather_ops << " gathers, " << e.reduce_ops << " reductions)\n";
        out << "  GPU->CPU       " << human_bytes(static_cast<double>(e.g2c_bytes)) << "\n";
        out << "  CPU->GPU       " << human_bytes(static_cast<double>(e.c2g_bytes)) << "\n";
        out << "estimated non-compute seconds\n";
        out << "  offload        " << std::setprecision(4) << e.estimated_offload_seconds << "\n";
        out << "  update         " << e.estimated_update_seconds << "\n";
    } else {
        out << "estimates        unavailable (rCache below working set)\n";
    }
    std::size_t uploads = 0;
    std::size_t extends = 0;
    for (const auto& d : plan.decision_trace) (d.action == PlanAction::upload_chunk ? uploads : extends)++;
    out << "decision trace   " << plan.decision_trace.size() << " actions (" << uploads << " uploads, "
        << extends << " rCache extensions)";
    if (!plan.decision_trace.empty()) out << ", first: " << to_string(plan.decision_trace.front().action);
    out << "\n";
    for (const auto& note : plan.notes) out << "note: " << note << "\n";
}

inline int cmd_gen_profile(const RunConfig& cfg, std::ostream& out) {
    ModelProfile m;
    if (!cfg.preset.empty()) {
        m = synthesize_preset(find_preset(cfg.preset), cfg.vocab, cfg.seq_len, cfg.batch);
    } else {
        if (cfg.hidden == 0 || cfg.layers == 0 || cfg.heads == 0) {
            fail(ErrorKind::invalid_argument, "gen-profile needs --preset or --hidden/--layers/--heads");
        }
        m = synthesize_transformer_profile(cfg.hidden, cfg.layers, cfg.heads, cfg.vocab, cfg.seq_len,
                                           cfg.batch);
    }
    write_output(cfg.output_path, serialize(m) + "\n", out);
    return kExitOk;
}

inline int cmd_plan(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto model = load_model_profile(read_file(cfg.model_path, "model profile"));
    const auto hw = load_hardware_profile(read_file(cfg.hardware_path, "hardware profile"));
    const auto plan = build_plan(model, hw, cfg.precision, plan_options(cfg));
    if (!plan.feasible && !cfg.allow_fallback) {
        fail(ErrorKind::infeasible, "budget of " + std::to_string(plan.u_allowed) +
                                        " bytes cannot hold the rCache working set of " +
                                        std::to_string(plan.working_set_blocks) +
                                        " blocks; rerun with --allow-fallback to emit a CPU-only plan");
    }
    if (plan.budget_clamped) err << "warning: reserved memory exceeds GPU capacity; budget clamped to 0\n";
    auto doc = to_json(plan);
    doc["meta"] = meta_block();
    if (cfg.output_path.empty() || cfg.output_path == "-") {
        out << doc.dump(2) << "\n";
        print_plan_summary(plan, model, err);
    } else {
        write_output(cfg.output_path, doc.dump(2) + "\n", out);
        print_plan_summary(plan, model, out);
    }
    return kExitOk;
}

/// Replays a plan against its model and hardware profiles.
inline SimReport simulate_plan(const Plan& plan, const ModelProfile& model, const HardwareProfile& hw) {
    if (!plan.feasible) {
        fail(ErrorKind::infeasible, "plan rCache of " + std::to_string(plan.n_block) +
                                        " blocks is below the working set; nothing to simulate");
    }
    const auto trace = coarsen_graph(model);
    const auto part = partition_multiuse(model);
    const auto layout = pack_chunks(part.single_use, plan.chunk_length);
    if (layout.n_chunks() != plan.n_chunks) {
        fail(ErrorKind::consistency, "plan expects " + std::to_string(plan.n_chunks) +
                                         " chunks but the model packs into " +
                                         std::to_string(layout.n_chunks()));
    }
    CacheConfig sim;
    sim.n_block = plan.n_block;
    sim.chunk_length = plan.chunk_length;
    sim.placement = plan.chunk_homes;
    sim.precision = plan.precision;
    sim.gpu_count = plan.gpu_count;
    sim.rates = hw.rates(plan.gpu_count);
    sim.velocity = plan.velocity;
    return simulate(build_chunk_trace(trace, layout), sim);
}

inline int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const auto plan = load_plan(read_file(cfg.plan_path, "plan"));
    const auto model = load_model_profile(read_file(cfg.model_path, "model profile"));
    const auto hw = load_hardware_profile(read_file(cfg.hardware_path, "hardware profile"));
    const auto report = simulate_plan(plan, model, hw);
    json doc = {{"format_version", kFormatVersion},
                {"chunk_length", plan.chunk_length},
                {"n_block", plan.n_block},
                {"gpu_count", plan.gpu_count},
                {"report", to_json(report)}};
    write_output(cfg.output_path, doc.dump(2) + "\n", out);
    return kExitOk;
}

inline std::string compare_csv(const RunConfig& cfg) {
    if (cfg.model_elements < 1) fail(ErrorKind::invalid_argument, "compare needs --model-elements >= 1");
    const std::uint64_t gpus = static_cast<std::uint64_t>(cfg.gpus.value_or(1));
    const Elements s = cfg.aggregate_elements.value_or(cfg.model_elements);
    const Elements c = cfg.chunk_length.value_or(std::min<Elements>(s, kDefaultCompareChunk));
    const auto rows = compare_strategies(cfg.model_elements, gpus, cfg.precision, s, c, cfg.epsilon);
    std::ostringstream csv;
    csv << "strategy,offload,gpu_mem_bytes,g2c_bytes,g2g_bytes\n";
    for (const auto& row : rows) {
        csv << to_string(row.strategy) << ',' << (row.offload ? "true" : "false") << ',';
        if (row.cost) {
            csv << row.cost->gpu_mem_per_gpu << ',' << row.cost->g2c_comm << ',' << row.cost->g2g_comm;
        } else {
            // ZeRO-3 offload memory is the gathered-parameter buffer, supplied via --epsilon.
            const auto comm = 4 * cfg.precision.compute_bytes * cfg.model_elements;
            csv << "NA," << comm << ',' << comm;
        }
        csv << '\n';
    }
    return csv.str();
}

inline int cmd_compare(const RunConfig& cfg, std::ostream& out) {
    write_output(cfg.output_path, compare_csv(cfg), out);
    return kExitOk;
}

inline std::string sweep_csv(const ChunkSearch& search) {
    std::ostringstream csv;
    csv << "chunk_length,n_chunks,waste_rate,replaced_bytes\n";
    for (const auto& row : search.candidates) {
        if (row.skipped) continue;
        csv << row.chunk_length << ',' << row.n_chunks << ',' << std::setprecision(9) << row.waste_rate
            << ',' << row.replaced_bytes << '\n';
    }
    return csv.str();
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto model = load_model_profile(read_file(cfg.model_path, "model profile"));
    const auto hw = load_hardware_profile(read_file(cfg.hardware_path, "hardware profile"));
    validate(hw);
    const int gpus = cfg.gpus.value_or(hw.gpu_count);
    if (gpus < 1 || gpus > hw.gpu_count) fail(ErrorKind::invalid_argument, "gpus out of range");
    Bytes u_allowed = 0;
    if (cfg.u_allowed) {
        u_allowed = *cfg.u_allowed;
    } else {
        u_allowed = allowed_memory(static_cast<double>(hw.gpu_capacity_bytes),
                                   static_cast<double>(model.buffer_bytes),
                                   static_cast<double>(model.activation_bytes), cfg.f_alloc, cfg.f_frag)
                        .bytes;
    }
    const auto part = partition_multiuse(model);
    const Bytes shared = shared_parameter_bytes(part.shared_elements, static_cast<std::uint64_t>(gpus),
                                                cfg.precision);
    const Bytes budget = u_allowed > shared ? u_allowed - shared : 0;
    const auto candidates = cfg.candidates ? *cfg.candidates : default_candidate_grid(model, gpus);
    const auto search = search_chunk_length(model, coarsen_graph(model), candidates, budget, cfg.precision);
    write_output(cfg.output_path, sweep_csv(search), out);
    err << "selected chunk length " << search.chunk_length << "\n";
    return kExitOk;
}

}  // namespace detail

inline std::string one_line(std::string text) {
    for (auto& ch : text) {
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    return text;
}

/// Executes one command. Errors are reported as a single
/// `error[<kind>]: <message>` line on `err`; infeasibility exits with 2,
/// every other failure with 1.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        cfg.precision.validate();
        switch (cfg.command) {
            case Command::gen_profile: return detail::cmd_gen_profile(cfg, out);
            case Command::plan: return detail::cmd_plan(cfg, out, err);
            case Command::simulate: return detail::cmd_simulate(cfg, out);
            case Command::compare: return detail::cmd_compare(cfg, out);
            case Command::sweep: return detail::cmd_sweep(cfg, out, err);
        }
        fail(ErrorKind::invalid_argument, "unknown command");
    } catch (const Error& e) {
        err << "error[" << to_string(e.kind()) << "]: " << one_line(e.what()) << "\n";
        return e.kind() == ErrorKind::infeasible ? kExitInfeasible : kExitInvalid;
    } catch (const std::exception& e) {
        err << "error[internal]: " << one_line(e.what()) << "\n";
        return kExitInvalid;
    }
}

}  // namespace chunkplan::cli
