#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <string_view>

namespace nscope {

// FNV-1a, 64 bit. Used for artifact content hashes and stage seed derivation;
// collision resistance is not a goal, change detection is.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

std::string hex64(uint64_t v);
uint64_t hash_file(const std::string& path);  // throws if unreadable

}  // namespace nscope
