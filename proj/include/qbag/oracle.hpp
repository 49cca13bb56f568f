#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qbag/domain.hpp"

namespace qbag {

enum class OracleKind { Synthetic2d, Synthetic3d, External };

OracleKind oracle_kind_from_name(std::string_view name);
std::string_view oracle_kind_name(OracleKind k);

struct OracleSpec {
    OracleKind kind = OracleKind::Synthetic2d;
    double noise_rate = 0.0;
    std::uint64_t noise_seed = 0;
    std::string external_dir;
    Bounds bounds;  // raw-coordinate bounds used by the external protocol
    double timeout_s = 3600.0;
    double poll_interval_s = 0.05;
    int num_classes = 5;
};

/// Deterministic five-class target on the unit square: two monotone trends
/// plus a sinusoidal warp, banded into equal-width speed classes.
int synthetic2d_label(const FeatureVector& x);

/// The 2d target with the second coordinate sheared along the third axis, so
/// the class boundaries become tilted surfaces. The x3 = 0.5 slice matches
/// synthetic2d exactly.
int synthetic3d_label(const FeatureVector& x);

class Oracle {
public:
    virtual ~Oracle() = default;
    virtual int num_classes() const = 0;
    /// Labels a batch of normalized points. `round` scopes the file protocol
    /// of external oracles; in-process oracles ignore it.
    virtual std::vector<int> label_batch(const std::vector<FeatureVector>& batch,
                                         int round) = 0;
};

class SyntheticOracle final : public Oracle {
public:
    explicit SyntheticOracle(OracleKind kind);
    int num_classes() const override { return 5; }
    std::vector<int> label_batch(const std::vector<FeatureVector>& batch, int round) override;

private:
    OracleKind kind_;
};

/// Wraps a base oracle and, with probability p per query, replaces the true
/// label with a uniformly random different class. Flips are keyed by
/// (seed, query sequence number), so a replayed query sequence flips the
/// same way.
class NoisyOracle final : public Oracle {
public:
    NoisyOracle(std::unique_ptr<Oracle> base, double flip_rate, std::uint64_t seed);
    int num_classes() const override { return base_->num_classes(); }
    std::vector<int> label_batch(const std::vector<FeatureVector>& batch, int round) override;

    std::uint64_t sequence() const { return sequence_; }
    void set_sequence(std::uint64_t s) { sequence_ = s; }

private:
    std::unique_ptr<Oracle> base_;
    double flip_rate_;
    std::uint64_t seed_;
    std::uint64_t sequence_ = 0;
};

// File handshake with an out-of-process labeler: the engine writes
// queries_<round>.csv ("id,x1,...,xd", raw coordinates), then polls for
// labels_<round>.csv ("id,label") until every id is answered or the timeout
// lapses. Timeouts raise PendingOracle with whatever labels arrived.
class ExternalOracle final : public Oracle {
public:
    ExternalOracle(std::string dir, Bounds bounds, int num_classes, double timeout_s,
                   double poll_interval_s);
    int num_classes() const override { return num_classes_; }
    std::vector<int> label_batch(const std::vector<FeatureVector>& batch, int round) override;

private:
    std::string dir_;
    Bounds bounds_;
    int num_classes_;
    double timeout_s_;
    double poll_interval_s_;
};

std::unique_ptr<Oracle> make_oracle(const OracleSpec& spec);

}  // namespace qbag
