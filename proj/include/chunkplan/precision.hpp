#pragma once

#include <cstdint>

#include "chunkplan/error.hpp"
#include "chunkplan/units.hpp"

namespace chunkplan {

/// Element widths used by mixed-precision training. Defaults are FP16 compute
/// state with FP32 Adam (master weight + two moments = 12 bytes/element).
struct PrecisionSpec {
    std::uint64_t compute_bytes = 2;     // L_c
    std::uint64_t optimizer_bytes = 4;   // L_os
    std::uint64_t optimizer_factor = 3;  // F_os

    /// Optimizer-state bytes per element, L_os * F_os.
    constexpr std::uint64_t optimizer_state_bytes() const { return optimizer_bytes * optimizer_factor; }

    void validate() const {
        if (compute_bytes == 0 || optimizer_bytes == 0 || optimizer_factor == 0) {
            fail(ErrorKind::validation, "precision widths must be strictly positive");
        }
    }

    friend bool operator==(const PrecisionSpec&, const PrecisionSpec&) = default;
};

}  // namespace chunkplan
