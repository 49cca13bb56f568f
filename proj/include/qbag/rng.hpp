#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace qbag {

// Deterministic randomness for the whole engine. std::mt19937_64 has a
// standard-specified sequence, but the standard distributions do not, so the
// draws below (bounded ints, uniform doubles, normals) are coded explicitly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Unbiased uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_below(std::uint64_t n);

    /// Standard normal deviate (Box-Muller, spare draw cached).
    double normal();

    /// In-place Fisher-Yates shuffle.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// One root seed fans out into independent substreams keyed by a short purpose
// tag plus optional indices. Used so that e.g. the initial-pool draw of a run
// does not depend on the query strategy or on how many committees were
// trained before it.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t a);
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t a,
                          std::uint64_t b);

}  // namespace qbag
