#pragma once

#include <cstdint>
#include <string_view>

namespace qnet {

// Counter-based splittable random stream (SplitMix64 finalizer in counter
// mode).  A stream is identified by a 64-bit key; the i-th output is
// mix(key + i*GOLDEN), so streams can be replayed from (seed, key path)
// alone and child streams derived from labels never interact with the
// parent's sequence.
class RngStream {
public:
    RngStream() : RngStream(0) {}

    explicit RngStream(std::uint64_t seed) : key_(mix(seed ^ kRootSalt)) {}

    // Independent child stream; derive(a) and derive(b) are decorrelated
    // for a != b, and deriving never consumes from this stream.
    [[nodiscard]] RngStream derive(std::uint64_t label) const {
        return RngStream(from_key{}, mix(key_ ^ mix(label ^ kChildSalt)));
    }

    [[nodiscard]] RngStream derive(std::string_view label) const {
        std::uint64_t h = 1469598103934665603ull;  // FNV-1a
        for (unsigned char c : label) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return derive(h);
    }

    std::uint64_t next_u64() { return mix(key_ + kGolden * ++ctr_); }

    // Uniform in [0,1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Exponential variate with the given mean.
    double exponential(double mean);

    std::uint64_t key() const { return key_; }
    std::uint64_t position() const { return ctr_; }

private:
    struct from_key {};
    RngStream(from_key, std::uint64_t key) : key_(key) {}

    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
    static constexpr std::uint64_t kRootSalt = 0x8BADF00D5EEDC0DEull;
    static constexpr std::uint64_t kChildSalt = 0xC0FFEE0DDF00DD11ull;

    static std::uint64_t mix(std::uint64_t z) {
        z += kGolden;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

}  // namespace qnet
