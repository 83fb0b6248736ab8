#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace gwrb {

// splitmix64: the standard 64-bit finalizer used to expand seeds and to
// derive independent substreams from (base_seed, index) pairs.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Seedable generator with a fully specified output path: mt19937_64 for the
// bit stream, explicit 53-bit conversion for uniforms, and Box-Muller for
// normals. std::normal_distribution is implementation-defined, so it is not
// used anywhere results must reproduce.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1), 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

    // Standard normal via Box-Muller (cosine branch; two uniforms per draw).
    // u1 lies in (0, 1] so the log is always finite.
    double normal() {
        const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Substream seed for replication `index` of a base seed. Documented in
    // report headers; changing this breaks byte-for-byte reproducibility.
    static std::uint64_t substream(std::uint64_t base_seed, std::uint64_t index) {
        return splitmix64(base_seed + (index + 1) * 0x9E3779B97F4A7C15ULL);
    }

    static constexpr std::string_view identity() {
        return "mt19937_64(splitmix64(seed)); uniforms = 53-bit >> conversion; "
               "normals = Box-Muller cosine branch; "
               "substream(rep) = splitmix64(base_seed + (rep+1)*0x9E3779B97F4A7C15)";
    }

private:
    static constexpr double kPi = 3.14159265358979323846;
    std::mt19937_64 engine_;
};

}  // namespace gwrb
