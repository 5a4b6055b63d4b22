#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace panoworld {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

using NodeId = std::uint32_t;
using RoomId = std::uint32_t;

inline constexpr double kPi = 3.14159265358979323846;

// All recoverable failures in the engine surface as this exception type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Worker count for row-parallel loops: PANOWORLD_THREADS if set, otherwise
// hardware concurrency (at least 1).
int thread_count();

// Runs fn(i) for i in [begin, end) split into contiguous chunks, one per
// worker. Callers must write only to disjoint outputs per index.
void parallel_for(int begin, int end, const std::function<void(int)>& fn);

// SplitMix64 finalizer; the hashing primitive behind procedural textures and
// scene generation.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic generator with a platform-independent mapping to doubles
// (std distributions differ between standard libraries).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }
    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next() % n; }

private:
    std::uint64_t state_;
};

}  // namespace panoworld
