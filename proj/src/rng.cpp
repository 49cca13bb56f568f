#include "qbag/rng.hpp"

#include <cmath>
#include <numbers>

namespace qbag {

std::uint64_t Rng::uniform_below(std::uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = (UINT64_MAX / n) * n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    double u1 = 1.0 - uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t hash_tag(std::string_view tag) {
    // FNV-1a over the tag bytes.
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
    return splitmix64(root ^ hash_tag(tag));
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t a) {
    return splitmix64(derive_seed(root, tag) ^ splitmix64(a + 1));
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t a,
                          std::uint64_t b) {
    return splitmix64(derive_seed(root, tag, a) ^ splitmix64(b + 0x9E37u));
}

}  // namespace qbag
