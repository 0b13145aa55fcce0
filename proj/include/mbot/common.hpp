#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mbot {

// Base class for all library failures.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid argument values (negative masses, bad parameters, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Mismatched dimensions between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Row/column totals that are required to agree do not.
class MassMismatchError : public Error {
public:
    using Error::Error;
};

// Breakdown of a numerical procedure (overflow, divergence, iteration cap).
class NumericalError : public Error {
public:
    using Error::Error;
};

// A restricted subproblem whose support cannot carry the marginals.
class InfeasibleSupportError : public Error {
public:
    using Error::Error;
};

// Deterministic counter-based uniform draws.  Keys are hashed with the
// splitmix64 finalizer so that evaluation order never matters and the same
// (seed, indices) tuple yields the same draw on every platform.
namespace rng {

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t key(std::uint64_t seed, std::uint64_t a) {
    return mix64(seed ^ mix64(a));
}

inline std::uint64_t key(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix64(key(seed, a) ^ mix64(b + 0x3c6ef372fe94f82aull));
}

inline std::uint64_t key(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                         std::uint64_t c) {
    return mix64(key(seed, a, b) ^ mix64(c + 0x78dde6e5fd29f05bull));
}

// Uniform in [0, 1).
inline double uniform01(std::uint64_t k) {
    return static_cast<double>(k >> 11) * 0x1.0p-53;
}

// Uniform in (0, 1]; used where strict positivity is required.
inline double uniform01_pos(std::uint64_t k) {
    return (static_cast<double>(k >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace rng

}  // namespace mbot
