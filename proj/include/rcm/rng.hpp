#pragma once

#include <cstdint>

namespace rcm {

// Counter-based randomness: every value is a pure function of (key, counter),
// so environments and Monte Carlo replicas are reproducible independently of
// thread count or evaluation order.

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (splitmix64(b) + kGolden));
}

// Uniform in (0,1]; the +1 keeps 0 out of the range so conductance laws on
// (0,1] never produce a zero edge.
inline double u01_from_bits(std::uint64_t h) {
    return static_cast<double>((h >> 11) + 1) * 0x1.0p-53;
}

// Sequential stream derived from (seed, stream). Distinct streams are
// decorrelated by the splitmix finalizer.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream)
        : state_(hash_combine(seed, stream)) {}

    std::uint64_t next_u64() {
        state_ += kGolden;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    double next_u01() { return u01_from_bits(next_u64()); }

  private:
    std::uint64_t state_;
};

}  // namespace rcm
