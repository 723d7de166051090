#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "chunkplan/error.hpp"
#include "chunkplan/hardware_profile.hpp"
#include "chunkplan/model_profile.hpp"

namespace chunkplan {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

namespace detail {

inline json parse_json(std::string_view text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::parse, std::string(what) + ": malformed JSON: " + e.what());
    }
}

inline const json& field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) fail(ErrorKind::parse, "field '" + path + "' must be an object");
    auto it = obj.find(key);
    if (it == obj.end()) {
        fail(ErrorKind::parse, "missing field '" + (path.empty() ? key : path + "." + key) + "'");
    }
    return *it;
}

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline std::uint64_t get_uint(const json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        fail(ErrorKind::parse, "field '" + join(path, key) + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

inline double get_number(const json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_number()) fail(ErrorKind::parse, "field '" + join(path, key) + "' must be a number");
    return v.get<double>();
}

inline std::string get_string(const json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_string()) fail(ErrorKind::parse, "field '" + join(path, key) + "' must be a string");
    return v.get<std::string>();
}

inline bool get_bool(const json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_boolean()) fail(ErrorKind::parse, "field '" + join(path, key) + "' must be a boolean");
    return v.get<bool>();
}

inline const json& get_array(const json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_array()) fail(ErrorKind::parse, "field '" + join(path, key) + "' must be an array");
    return v;
}

inline void check_version(const json& doc, const char* what) {
    if (!doc.is_object()) fail(ErrorKind::parse, std::string(what) + ": top level must be an object");
    const auto& v = field(doc, "format_version", "");
    if (!v.is_number_integer() || v.get<std::int64_t>() != kFormatVersion) {
        fail(ErrorKind::parse, std::string(what) + ": unsupported format_version " + v.dump());
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Model profile

inline json to_json(const ModelProfile& m) {
    json params = json::array();
    for (const auto& p : m.parameters) {
        params.push_back({{"id", p.id}, {"numel", p.numel}, {"shared", p.shared}});
    }
    json ops = json::array();
    for (const auto& op : m.operators) {
        ops.push_back({{"name", op.name},
                       {"param_ids", op.param_ids},
                       {"ac_group", op.ac_group ? json(*op.ac_group) : json(nullptr)}});
    }
    return {{"format_version", kFormatVersion},
            {"name", m.name},
            {"parameters", std::move(params)},
            {"operators", std::move(ops)},
            {"activation_bytes", m.activation_bytes},
            {"buffer_bytes", m.buffer_bytes}};
}

inline ModelProfile model_profile_from_json(const json& doc) {
    using namespace detail;
    check_version(doc, "model profile");
    ModelProfile m;
    m.name = get_string(doc, "name", "");
    const auto& params = get_array(doc, "parameters", "");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string path = "parameters[" + std::to_string(i) + "]";
        ParameterSpec p;
        p.id = get_string(params[i], "id", path);
        p.numel = get_uint(params[i], "numel", path);
        p.shared = get_bool(params[i], "shared", path);
        m.parameters.push_back(std::move(p));
    }
    const auto& ops = get_array(doc, "operators", "");
    for (std::size_t i = 0; i < ops.size(); ++i) {
        const std::string path = "operators[" + std::to_string(i) + "]";
        OperatorNode op;
        op.name = get_string(ops[i], "name", path);
        const auto& ids = get_array(ops[i], "param_ids", path);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (!ids[k].is_string()) {
                fail(ErrorKind::parse, "field '" + path + ".param_ids[" + std::to_string(k) +
                                           "]' must be a string");
            }
            op.param_ids.push_back(ids[k].get<std::string>());
        }
        const auto& group = field(ops[i], "ac_group", path);
        if (group.is_number_integer()) {
            op.ac_group = group.get<std::int64_t>();
        } else if (!group.is_null()) {
            fail(ErrorKind::parse, "field '" + path + ".ac_group' must be an integer or null");
        }
        m.operators.push_back(std::move(op));
    }
    m.activation_bytes = get_uint(doc, "activation_bytes", "");
    m.buffer_bytes = get_uint(doc, "buffer_bytes", "");
    validate(m);
    return m;
}

inline ModelProfile load_model_profile(std::string_view text) {
    return model_profile_from_json(detail::parse_json(text, "model profile"));
}

inline std::string serialize(const ModelProfile& m) { return to_json(m).dump(2); }

// ---------------------------------------------------------------------------
// Hardware profile. Files carry GB/s (decimal); memory holds bytes/second.

inline json to_json(const HardwareProfile& hw) {
    json tables = json::object();
    for (const auto& [n, t] : hw.tables) {
        tables[std::to_string(n)] = {
            {"b_g2g", t.b_g2g ? json(*t.b_g2g / kGiga) : json(nullptr)},
            {"b_c2g", t.b_c2g / kGiga},
            {"b_g2c", t.b_g2c / kGiga},
            {"v_g", t.v_g / kGiga},
            {"v_c", t.v_c / kGiga},
        };
    }
    return {{"format_version", kFormatVersion},
            {"gpu_count", hw.gpu_count},
            {"gpu_capacity_bytes", hw.gpu_capacity_bytes},
            {"tables", std::move(tables)}};
}

inline HardwareProfile hardware_profile_from_json(const json& doc) {
    using namespace detail;
    check_version(doc, "hardware profile");
    HardwareProfile hw;
    const auto count = get_uint(doc, "gpu_count", "");
    if (count > 1u << 20) fail(ErrorKind::parse, "field 'gpu_count' out of range");
    hw.gpu_count = static_cast<int>(count);
    hw.gpu_capacity_bytes = get_uint(doc, "gpu_capacity_bytes", "");
    const auto& tables = field(doc, "tables", "");
    if (!tables.is_object()) fail(ErrorKind::parse, "field 'tables' must be an object");
    for (const auto& [key, row] : tables.items()) {
        const std::string path = "tables." + key;
        int n = 0;
        try {
            std::size_t used = 0;
            n = std::stoi(key, &used);
            if (used != key.size()) throw std::invalid_argument(key);
        } catch (const std::exception&) {
            fail(ErrorKind::parse, "field '" + path + "': key must be a process count");
        }
        RateTable t;
        const auto& g2g = field(row, "b_g2g", path);
        if (g2g.is_number()) {
            t.b_g2g = g2g.get<double>() * kGiga;
        } else if (!g2g.is_null()) {
            fail(ErrorKind::parse, "field '" + path + ".b_g2g' must be a number or null");
        }
        t.b_c2g = get_number(row, "b_c2g", path) * kGiga;
        t.b_g2c = get_number(row, "b_g2c", path) * kGiga;
        t.v_g = get_number(row, "v_g", path) * kGiga;
        t.v_c = get_number(row, "v_c", path) * kGiga;
        hw.tables[n] = t;
    }
    validate(hw);
    return hw;
}

inline HardwareProfile load_hardware_profile(std::string_view text) {
    return hardware_profile_from_json(detail::parse_json(text, "hardware profile"));
}

inline std::string serialize(const HardwareProfile& hw) { return to_json(hw).dump(2); }

}  // namespace chunkplan
