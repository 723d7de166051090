#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "chunkplan/error.hpp"
#include "chunkplan/units.hpp"

namespace chunkplan {

/// Aggregate rates for n cooperating processes, all in bytes/second.
/// Velocities are optimizer-update throughput as profiled (bytes of FP32
/// state streamed per second); see BenefitOptions for the element conversion.
struct RateTable {
    std::optional<double> b_g2g;  // absent for n = 1 (no peer)
    double b_c2g = 0.0;
    double b_g2c = 0.0;
    double v_g = 0.0;
    double v_c = 0.0;

    friend bool operator==(const RateTable&, const RateTable&) = default;
};

struct HardwareProfile {
    int gpu_count = 0;
    Bytes gpu_capacity_bytes = 0;
    std::map<int, RateTable> tables;  // keyed by process count

    const RateTable& rates(int n) const {
        auto it = tables.find(n);
        if (it == tables.end()) {
            fail(ErrorKind::validation, "hardware profile has no rate table for n=" + std::to_string(n));
        }
        return it->second;
    }

    friend bool operator==(const HardwareProfile&, const HardwareProfile&) = default;
};

/// Profiled velocities are bytes/second of optimizer state; update-time terms
/// need elements/second. Each updated element streams `element_bytes` bytes
/// (unset: the optimizer precision width, i.e. FP32 master weights).
struct VelocityConvention {
    std::optional<double> element_bytes;

    double elements_per_second(double bytes_per_second, std::uint64_t optimizer_bytes) const {
        const double width = element_bytes.value_or(static_cast<double>(optimizer_bytes));
        return bytes_per_second / width;
    }

    friend bool operator==(const VelocityConvention&, const VelocityConvention&) = default;
};

inline void validate(const HardwareProfile& hw) {
    if (hw.gpu_count < 1) fail(ErrorKind::validation, "gpu_count must be >= 1");
    if (hw.gpu_capacity_bytes == 0) fail(ErrorKind::validation, "gpu_capacity_bytes must be > 0");
    if (!hw.tables.contains(hw.gpu_count)) {
        fail(ErrorKind::validation,
             "hardware profile lacks a rate table for n=gpu_count=" + std::to_string(hw.gpu_count));
    }
    for (const auto& [n, t] : hw.tables) {
        const std::string where = "tables[" + std::to_string(n) + "]";
        if (n < 1 || n > hw.gpu_count) fail(ErrorKind::validation, where + ": process count out of range");
        auto positive = [&](double v, const char* field) {
            if (!(v > 0.0)) fail(ErrorKind::validation, where + "." + field + " must be > 0");
        };
        positive(t.b_c2g, "b_c2g");
        positive(t.b_g2c, "b_g2c");
        positive(t.v_g, "v_g");
        positive(t.v_c, "v_c");
        if (t.b_g2g) {
            positive(*t.b_g2g, "b_g2g");
        } else if (n > 1) {
            fail(ErrorKind::validation, where + ".b_g2g is required when n > 1");
        }
    }
}

}  // namespace chunkplan
