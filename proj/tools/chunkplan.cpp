// chunkplan: chunk/rCache placement planner and trace-driven simulator.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "chunkplan/cli.hpp"

namespace {

using chunkplan::cli::RunConfig;

// Count-valued flags are taken as strings so they accept 1e9 and 64Mi.
struct CountFlags {
    std::string hidden, layers, heads, vocab, seq_len, batch;
    std::string u_allowed, candidates, model_elements, aggregate, chunk_length, epsilon;
};

std::vector<std::uint64_t> parse_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(chunkplan::parse_count(item));
    }
    if (out.empty()) chunkplan::fail(chunkplan::ErrorKind::parse, "empty candidate list");
    return out;
}

void add_budget_flags(CLI::App* cmd, RunConfig& cfg, CountFlags& flags) {
    cmd->add_option("--gpus", cfg.gpus, "Process count to plan for (default: profile gpu_count)");
    cmd->add_option("--f-alloc", cfg.f_alloc, "Usable fraction of GPU memory")->capture_default_str();
    cmd->add_option("--f-frag", cfg.f_frag, "Activation fragmentation multiplier")->capture_default_str();
    cmd->add_option("--u-allowed", flags.u_allowed, "Explicit per-GPU budget in bytes");
    cmd->add_option("--candidates", flags.candidates, "Comma-separated chunk lengths in elements");
}

void add_precision_flags(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--compute-bytes", cfg.precision.compute_bytes, "Compute precision width")
        ->capture_default_str();
    cmd->add_option("--optimizer-bytes", cfg.precision.optimizer_bytes, "Optimizer precision width")
        ->capture_default_str();
    cmd->add_option("--optimizer-factor", cfg.precision.optimizer_factor, "Optimizer state multiplier")
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chunk-based memory planner and rCache simulator"};
    app.require_subcommand(1);

    RunConfig cfg;
    CountFlags flags;

    auto* gen = app.add_subcommand("gen-profile", "Write a synthetic GPT-2 style model profile");
    gen->add_option("--preset", cfg.preset, "gpt2-4b | gpt2-10b | gpt2-15b | gpt2-20b");
    gen->add_option("--hidden", flags.hidden, "Hidden size");
    gen->add_option("--layers", flags.layers, "Number of layers");
    gen->add_option("--heads", flags.heads, "Attention heads");
    gen->add_option("--vocab", flags.vocab, "Vocabulary size (default 50257)");
    gen->add_option("--seq-len", flags.seq_len, "Sequence length (default 1024)");
    gen->add_option("--batch", flags.batch, "Per-GPU batch size (default 2)");
    gen->add_option("-o,--output", cfg.output_path, "Output file (default stdout)");

    auto* plan = app.add_subcommand("plan", "Search the chunk length and GPU memory allocation");
    plan->add_option("--model", cfg.model_path, "Model profile")->required()->check(CLI::ExistingFile);
    plan->add_option("--hardware", cfg.hardware_path, "Hardware profile")->required()->check(CLI::ExistingFile);
    plan->add_option("-o,--output", cfg.output_path, "Plan file (default stdout)");
    plan->add_option("--velocity-element-bytes", cfg.velocity_element_bytes,
                     "Bytes per updated element when converting profiled velocities");
    plan->add_flag("--allow-fallback", cfg.allow_fallback,
                   "Emit a CPU-only plan when the budget is below the rCache working set");
    add_budget_flags(plan, cfg, flags);
    add_precision_flags(plan, cfg);

    auto* sim = app.add_subcommand("simulate", "Replay a plan through the rCache simulator");
    sim->add_option("--plan", cfg.plan_path, "Plan file")->required()->check(CLI::ExistingFile);
    sim->add_option("--model", cfg.model_path, "Model profile")->required()->check(CLI::ExistingFile);
    sim->add_option("--hardware", cfg.hardware_path, "Hardware profile")->required()->check(CLI::ExistingFile);
    sim->add_option("-o,--output", cfg.output_path, "Report file (default stdout)");

    auto* cmp = app.add_subcommand("compare", "Memory and communication of every strategy row");
    cmp->add_option("--model-elements", flags.model_elements, "Model size M in elements")->required();
    cmp->add_option("--gpus", cfg.gpus, "Number of GPUs N (default 1)");
    cmp->add_option("--aggregate-elements", flags.aggregate, "Aggregate chunk length S (default M)");
    cmp->add_option("--chunk-length", flags.chunk_length, "Chunk length C (default min(S, 64Mi))");
    cmp->add_option("--epsilon", flags.epsilon, "ZeRO-3 offload gathered-parameter buffer in bytes");
    cmp->add_option("-o,--output", cfg.output_path, "CSV file (default stdout)");
    add_precision_flags(cmp, cfg);

    auto* sweep = app.add_subcommand("sweep", "Replaced bytes and waste for each candidate chunk length");
    sweep->add_option("--model", cfg.model_path, "Model profile")->required()->check(CLI::ExistingFile);
    sweep->add_option("--hardware", cfg.hardware_path, "Hardware profile")->required()->check(CLI::ExistingFile);
    sweep->add_option("-o,--output", cfg.output_path, "CSV file (default stdout)");
    add_budget_flags(sweep, cfg, flags);
    add_precision_flags(sweep, cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : chunkplan::cli::kExitInvalid;
    }

    try {
        auto count = [](const std::string& s, std::uint64_t fallback) {
            return s.empty() ? fallback : chunkplan::parse_count(s);
        };
        auto optional_count = [](const std::string& s) -> std::optional<std::uint64_t> {
            if (s.empty()) return std::nullopt;
            return chunkplan::parse_count(s);
        };
        cfg.hidden = count(flags.hidden, 0);
        cfg.layers = count(flags.layers, 0);
        cfg.heads = count(flags.heads, 0);
        cfg.vocab = count(flags.vocab, cfg.vocab);
        cfg.seq_len = count(flags.seq_len, cfg.seq_len);
        cfg.batch = count(flags.batch, cfg.batch);
        cfg.u_allowed = optional_count(flags.u_allowed);
        cfg.model_elements = count(flags.model_elements, 0);
        cfg.aggregate_elements = optional_count(flags.aggregate);
        cfg.chunk_length = optional_count(flags.chunk_length);
        cfg.epsilon = optional_count(flags.epsilon);
        if (!flags.candidates.empty()) cfg.candidates = parse_list(flags.candidates);
    } catch (const chunkplan::Error& e) {
        std::cerr << "error[" << chunkplan::to_string(e.kind()) << "]: " << e.what() << "\n";
        return chunkplan::cli::kExitInvalid;
    }

    if (gen->parsed()) cfg.command = chunkplan::cli::Command::gen_profile;
    if (plan->parsed()) cfg.command = chunkplan::cli::Command::plan;
    if (sim->parsed()) cfg.command = chunkplan::cli::Command::simulate;
    if (cmp->parsed()) cfg.command = chunkplan::cli::Command::compare;
    if (sweep->parsed()) cfg.command = chunkplan::cli::Command::sweep;

    return chunkplan::cli::run(cfg, std::cout, std::cerr);
}
