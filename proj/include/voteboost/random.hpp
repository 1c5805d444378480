#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace voteboost {

/// Deterministic random stream identified by (master_seed, stream_id).
///
/// Child streams are derived by hashing indices into the stream id, so
/// experiment drivers can hand every (replicate, fold, member) its own
/// reproducible sequence without sharing mutable state.
class RandomSource {
public:
    RandomSource() : RandomSource(0, 0) {}
    explicit RandomSource(std::uint64_t master_seed, std::uint64_t stream_id = 0)
        : master_seed_(master_seed), stream_id_(stream_id),
          engine_(mix(master_seed ^ mix(stream_id + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    /// Fresh source for a sub-task. Does not advance this source.
    RandomSource derive(std::uint64_t index) const {
        return RandomSource(master_seed_, mix(stream_id_ * 0x9e3779b97f4a7c15ULL + index + 1));
    }

    RandomSource derive(std::initializer_list<std::uint64_t> path) const {
        RandomSource out = *this;
        for (auto k : path) out = out.derive(k);
        return out;
    }

    std::mt19937_64& engine() { return engine_; }

    /// Uniform real in [0, 1).
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

    bool coin() { return below(2) == 1; }

    friend bool operator==(const RandomSource& a, const RandomSource& b) {
        return a.master_seed_ == b.master_seed_ && a.stream_id_ == b.stream_id_ &&
               a.engine_ == b.engine_;
    }

private:
    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

}  // namespace voteboost
