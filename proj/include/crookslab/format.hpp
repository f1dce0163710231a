#pragma once

// Deterministic number formatting for emitted data files: identical inputs
// must produce identical bytes on every run and thread count.

#include <cstdint>
#include <cstdio>
#include <string>

namespace crookslab {

/// Full-precision, locale-independent double formatting (%.17g round-trips).
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

/// Fixed two-decimal formatting for rounded summary values.
inline std::string format_fixed2(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", x);
    return buf;
}

/// FNV-1a 64-bit content hash, reported as fixed-width hex.
inline std::string fnv1a64_hex(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace crookslab
