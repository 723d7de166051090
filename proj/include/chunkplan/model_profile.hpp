#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "chunkplan/error.hpp"
#include "chunkplan/units.hpp"

namespace chunkplan {

struct ParameterSpec {
    std::string id;
    Elements numel = 0;
    bool shared = false;  // used more than once per forward pass (tied embedding)

    friend bool operator==(const ParameterSpec&, const ParameterSpec&) = default;
};

struct OperatorNode {
    std::string name;
    std::vector<std::string> param_ids;
    std::optional<std::int64_t> ac_group;  // enclosing checkpointed function, if any

    friend bool operator==(const OperatorNode&, const OperatorNode&) = default;
};

/// Stand-in for the output of a pre-runtime profiler: parameters in
/// declaration order, operators in forward execution order, and the two
/// reserved byte counts the budget needs.
struct ModelProfile {
    std::string name;
    std::vector<ParameterSpec> parameters;
    std::vector<OperatorNode> operators;
    Bytes activation_bytes = 0;
    Bytes buffer_bytes = 0;

    const ParameterSpec* find(const std::string& id) const {
        for (const auto& p : parameters) {
            if (p.id == id) return &p;
        }
        return nullptr;
    }

    Elements total_elements() const {
        Elements total = 0;
        for (const auto& p : parameters) total += p.numel;
        return total;
    }

    friend bool operator==(const ModelProfile&, const ModelProfile&) = default;
};

inline void validate(const ModelProfile& profile) {
    std::unordered_set<std::string> ids;
    for (const auto& p : profile.parameters) {
        if (p.id.empty()) fail(ErrorKind::validation, "parameter with empty id");
        if (p.numel < 1) fail(ErrorKind::validation, "parameter '" + p.id + "' has numel < 1");
        if (!ids.insert(p.id).second) fail(ErrorKind::validation, "duplicate parameter id '" + p.id + "'");
    }
    std::unordered_set<std::string> used;
    for (const auto& op : profile.operators) {
        for (const auto& pid : op.param_ids) {
            if (!ids.contains(pid)) {
                fail(ErrorKind::validation,
                     "operator '" + op.name + "' references unknown parameter '" + pid + "'");
            }
            used.insert(pid);
        }
    }
    for (const auto& p : profile.parameters) {
        if (!p.shared && !used.contains(p.id)) {
            fail(ErrorKind::validation, "parameter '" + p.id + "' is never read by any operator");
        }
    }
}

/// Closed-form activation estimate for a checkpointed transformer: one
/// checkpoint tensor of batch*seq*hidden per layer plus an equal recompute
/// margin for the layer being replayed.
inline constexpr std::uint64_t kCheckpointActivationFactor = 2;

/// GPT-2 style decoder stack: tied token embedding (shared), learned position
/// embedding, `layers` checkpointed blocks, final layer norm, and an LM head
/// reading the tied embedding again.
inline ModelProfile synthesize_transformer_profile(std::uint64_t hidden, std::uint64_t layers,
                                                   std::uint64_t heads, std::uint64_t vocab,
                                                   std::uint64_t seq_len, std::uint64_t batch) {
    if (hidden < 1 || layers < 1 || heads < 1 || vocab < 1 || seq_len < 1 || batch < 1) {
        fail(ErrorKind::invalid_argument, "transformer dimensions must all be >= 1");
    }
    constexpr std::uint64_t compute_bytes = 2;
    const std::uint64_t h = hidden;

    ModelProfile m;
    m.name = "gpt2-h" + std::to_string(hidden) + "-l" + std::to_string(layers) + "-a" +
             std::to_string(heads);

    auto add_param = [&](std::string id, Elements numel, bool shared = false) {
        m.parameters.push_back({std::move(id), numel, shared});
        return m.parameters.back().id;
    };
    auto add_op = [&](std::string name, std::vector<std::string> params,
                      std::optional<std::int64_t> group) {
        m.operators.push_back({std::move(name), std::move(params), group});
    };

    const auto wte = add_param("wte.weight", vocab * h, true);
    const auto wpe = add_param("wpe.weight", seq_len * h);
    add_op("embedding", {wte, wpe}, std::nullopt);

    for (std::uint64_t i = 0; i < layers; ++i) {
        const std::string pre = "h." + std::to_string(i) + ".";
        const auto group = static_cast<std::int64_t>(i);
        const auto ln1_w = add_param(pre + "ln_1.weight", h);
        const auto ln1_b = add_param(pre + "ln_1.bias", h);
        const auto qkv_w = add_param(pre + "attn.c_attn.weight", 3 * h * h);
        const auto qkv_b = add_param(pre + "attn.c_attn.bias", 3 * h);
        const auto proj_w = add_param(pre + "attn.c_proj.weight", h * h);
        const auto proj_b = add_param(pre + "attn.c_proj.bias", h);
        const auto ln2_w = add_param(pre + "ln_2.weight", h);
        const auto ln2_b = add_param(pre + "ln_2.bias", h);
        const auto fc_w = add_param(pre + "mlp.c_fc.weight", 4 * h * h);
        const auto fc_b = add_param(pre + "mlp.c_fc.bias", 4 * h);
        const auto out_w = add_param(pre + "mlp.c_proj.weight", 4 * h * h);
        const auto out_b = add_param(pre + "mlp.c_proj.bias", h);

        add_op(pre + "ln_1", {ln1_w, ln1_b}, group);
        add_op(pre + "attn.c_attn", {qkv_w, qkv_b}, group);
        add_op(pre + "attn.core", {}, group);
        add_op(pre + "attn.c_proj", {proj_w, proj_b}, group);
        add_op(pre + "ln_2", {ln2_w, ln2_b}, group);
        add_op(pre + "mlp.c_fc", {fc_w, fc_b}, group);
        add_op(pre + "mlp.c_proj", {out_w, out_b}, group);
    }

    const auto lnf_w = add_param("ln_f.weight", h);
    const auto lnf_b = add_param("ln_f.bias", h);
    add_op("ln_f", {lnf_w, lnf_b}, std::nullopt);
    add_op("lm_head", {wte}, std::nullopt);

    m.activation_bytes =
        compute_bytes * batch * seq_len * hidden * layers * kCheckpointActivationFactor;
    // One causal-mask buffer (seq x seq bytes) registered per attention block.
    m.buffer_bytes = layers * seq_len * seq_len;
    return m;
}

struct TransformerPreset {
    const char* name;
    std::uint64_t hidden;
    std::uint64_t layers;
    std::uint64_t heads;
    double nominal_elements;
};

inline constexpr std::uint64_t kDefaultVocab = 50257;
inline constexpr std::uint64_t kDefaultSeqLen = 1024;
inline constexpr std::uint64_t kDefaultBatch = 2;

inline constexpr TransformerPreset kGpt2Presets[] = {
    {"gpt2-4b", 3072, 32, 24, 4e9},
    {"gpt2-10b", 4096, 48, 32, 10e9},
    {"gpt2-15b", 8192, 18, 64, 15e9},
    {"gpt2-20b", 8192, 24, 64, 20e9},
};

inline const TransformerPreset& find_preset(const std::string& name) {
    for (const auto& p : kGpt2Presets) {
        if (name == p.name) return p;
    }
    fail(ErrorKind::invalid_argument, "unknown preset '" + name + "'");
}

inline ModelProfile synthesize_preset(const TransformerPreset& preset,
                                      std::uint64_t vocab = kDefaultVocab,
                                      std::uint64_t seq_len = kDefaultSeqLen,
                                      std::uint64_t batch = kDefaultBatch) {
    auto m = synthesize_transformer_profile(preset.hidden, preset.layers, preset.heads, vocab,
                                            seq_len, batch);
    m.name = preset.name;
    return m;
}

}  // namespace chunkplan
