#pragma once

#include <cmath>
#include <cstdint>

namespace delayfolio {

// Counter-based stream: output i of stream (seed, stream_id) is a pure
// function of (seed, stream_id, i), so path simulation is reproducible
// no matter how the paths are scheduled over threads.
namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace detail

class PathRng {
  public:
    PathRng(std::uint64_t seed, std::uint64_t stream)
        : seed_(detail::mix64(seed)), key_(detail::mix64(detail::mix64(seed + 0x632BE59BD9B4E019ULL) ^ (stream + 1))) {}

    std::uint64_t next_u64() {
        std::uint64_t c = counter_++;
        return detail::mix64(detail::mix64(seed_ + c * 0x9E3779B97F4A7C15ULL) ^ key_);
    }

    // uniform on (0, 1)
    double next_u01() {
        const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    // standard normal via Box-Muller; consumes exactly two uniforms
    double next_normal() {
        const double u1 = next_u01();
        const double u2 = next_u01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

  private:
    std::uint64_t seed_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace delayfolio
