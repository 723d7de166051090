#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "chunkplan/error.hpp"

namespace chunkplan {

using Elements = std::uint64_t;
using Bytes = std::uint64_t;
using ChunkId = std::uint32_t;

inline constexpr double kGiga = 1e9;

constexpr std::uint64_t ceil_div(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0 : (num + den - 1) / den;
}

/// Parses a non-negative count. Accepts plain integers, scientific notation
/// ("1e9", "2.5e3") and binary suffixes Ki/Mi/Gi/Ti ("64Mi", "1.5Gi").
/// Fractional results are rejected so stored values stay exact integers.
inline std::uint64_t parse_count(std::string_view text) {
    std::string_view body = text;
    double scale = 1.0;
    struct Suffix {
        std::string_view tag;
        double factor;
    };
    constexpr Suffix suffixes[] = {
        {"Ki", 1024.0},
        {"Mi", 1024.0 * 1024.0},
        {"Gi", 1024.0 * 1024.0 * 1024.0},
        {"Ti", 1024.0 * 1024.0 * 1024.0 * 1024.0},
    };
    for (const auto& s : suffixes) {
        if (body.size() > s.tag.size() && body.substr(body.size() - s.tag.size()) == s.tag) {
            body.remove_suffix(s.tag.size());
            scale = s.factor;
            break;
        }
    }
    if (body.empty()) fail(ErrorKind::parse, "empty numeric value");

    std::uint64_t as_int = 0;
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), as_int);
    if (ec == std::errc() && ptr == body.data() + body.size() && scale == 1.0) return as_int;

    // std::from_chars for double is not available on every libstdc++ we target.
    std::string owned(body);
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(owned, &used);
    } catch (const std::exception&) {
        fail(ErrorKind::parse, "not a number: '" + std::string(text) + "'");
    }
    if (used != owned.size()) fail(ErrorKind::parse, "not a number: '" + std::string(text) + "'");
    value *= scale;
    if (!std::isfinite(value) || value < 0.0 ||
        value > static_cast<double>(std::numeric_limits<std::uint64_t>::max())) {
        fail(ErrorKind::parse, "count out of range: '" + std::string(text) + "'");
    }
    if (value != std::floor(value)) {
        fail(ErrorKind::parse, "count must be an integer: '" + std::string(text) + "'");
    }
    return static_cast<std::uint64_t>(value);
}

}  // namespace chunkplan
