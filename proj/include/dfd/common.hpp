#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dfd {

// Error taxonomy used across the library. Everything user-facing derives
// from std::runtime_error so callers can catch one base.
struct invalid_input : std::runtime_error {
    explicit invalid_input(const std::string& m) : std::runtime_error(m) {}
};
struct invalid_config : std::runtime_error {
    explicit invalid_config(const std::string& m) : std::runtime_error(m) {}
};
struct decode_error : std::runtime_error {
    explicit decode_error(const std::string& m) : std::runtime_error(m) {}
};
struct io_error : std::runtime_error {
    explicit io_error(const std::string& m) : std::runtime_error(m) {}
};
struct undefined_metric : std::runtime_error {
    explicit undefined_metric(const std::string& m) : std::runtime_error(m) {}
};

// Deterministic seed derivation: mixes a base seed with stream tags so that
// independent consumers (stages, epochs, samples) get decorrelated streams
// without sharing generator state.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

// Fixed-format float printing so serialized artifacts are byte-stable
// across runs.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
}

}  // namespace dfd
