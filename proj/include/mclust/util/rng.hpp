#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mclust {

// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Child seed for stream `counter` of `root`. Streams with distinct counters are
// independent, so work split across threads draws the same numbers as a serial run.
constexpr std::uint64_t split_seed(std::uint64_t root, std::uint64_t counter) noexcept {
    return splitmix64(splitmix64(root) ^ splitmix64(counter + 0x632BE59BD9B4E019ULL));
}

constexpr std::uint64_t stream_tag(std::string_view name) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t root, std::uint64_t counter = 0) {
    return Engine{split_seed(root, counter)};
}

inline Engine make_engine(std::uint64_t root, std::string_view stream, std::uint64_t counter = 0) {
    return Engine{split_seed(split_seed(root, stream_tag(stream)), counter)};
}

}  // namespace mclust
