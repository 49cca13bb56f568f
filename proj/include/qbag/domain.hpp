#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace qbag {

/// A point in normalized feature space. Every coordinate lies in [0, 1];
/// the dimension is fixed per experiment.
struct FeatureVector {
    std::vector<double> coords;

    FeatureVector() = default;
    explicit FeatureVector(std::vector<double> c) : coords(std::move(c)) {}

    int dim() const { return static_cast<int>(coords.size()); }
    double operator[](int i) const { return coords[static_cast<std::size_t>(i)]; }
};

bool operator==(const FeatureVector& a, const FeatureVector& b);

/// Strict lexicographic order on coordinates; the deterministic tie-break
/// used wherever two candidates score equally.
bool lex_less(const FeatureVector& a, const FeatureVector& b);

double squared_distance(const FeatureVector& a, const FeatureVector& b);

enum class Provenance { Initial, DisagreementQuery, ExploratoryQuery, RandomQuery };

std::string_view provenance_name(Provenance p);
Provenance provenance_from_name(std::string_view name);

struct LabeledInstance {
    long id = -1;
    FeatureVector features;
    int label = 0;
    Provenance provenance = Provenance::Initial;
    int round = 0;
};

struct UnlabeledPoint {
    long id = -1;
    FeatureVector features;
};

/// Disjoint labeled set L and unlabeled set U. Points move from U to L once
/// per query and never back; ids are stable across the move.
struct Pool {
    int dimension = 0;
    std::vector<LabeledInstance> labeled;
    std::vector<UnlabeledPoint> unlabeled;
};

/// Per-class vote counts from a committee of n_c hypotheses.
struct VoteTally {
    std::vector<int> counts;
    int n_c = 0;

    int max_count() const;
};

/// Tally plus the per-class sum of member probabilities, kept for tie-breaks
/// and entropy scoring.
struct PointVote {
    VoteTally tally;
    std::vector<double> prob_sum;
};

/// True when no class holds more than half the committee's votes
/// (2 * max_count <= n_c, all in integer arithmetic).
bool tally_in_disagreement(const VoteTally& t);

/// Majority class of a vote. Ties go to the class with the larger summed
/// probability, then to the smaller class index.
int vote_winner(const PointVote& v);

struct AxisBounds {
    double lo = 0.0;
    double hi = 1.0;
};
using Bounds = std::vector<AxisBounds>;

Bounds unit_bounds(int dimension);

/// Affine map of raw feature rows onto the unit hypercube. Throws ConfigError
/// for degenerate bounds, RangeError for out-of-bounds values (naming the
/// dimension), DomainError for duplicate rows.
std::vector<FeatureVector> normalize_features(const std::vector<std::vector<double>>& raw,
                                              const Bounds& bounds);

std::vector<double> denormalize(const FeatureVector& v, const Bounds& bounds);

inline constexpr std::int64_t kDefaultPoolCap = 1 << 24;

/// Uniform lattice of resolution^d points covering [0,1]^d, all unlabeled,
/// ids assigned in lexicographic order. Throws SizeError past the cap.
Pool build_grid_pool(int dimension, int resolution, std::int64_t cap = kDefaultPoolCap);

/// Count votes per class. Throws DomainError on an empty list or a label
/// outside [0, K).
VoteTally tally_votes(const std::vector<int>& predictions, int num_classes);

/// Checks L/U disjointness, duplicate-freedom, and dimension consistency.
void validate_pool(const Pool& pool);

/// Moves the unlabeled points at the given indices into the labeled set,
/// in the given order, preserving the relative order of the survivors.
void move_to_labeled(Pool& pool, const std::vector<int>& unlabeled_indices,
                     const std::vector<int>& labels, Provenance provenance, int round);

// Pool snapshot CSV: header "id,x1,...,xd,label,provenance,round" with the
// last three fields empty for unlabeled rows. Values carry 17 significant
// digits so snapshots round-trip exactly.
void write_pool_csv(std::ostream& out, const Pool& pool, std::string_view comment = {});
Pool read_pool_csv(std::istream& in);

}  // namespace qbag
