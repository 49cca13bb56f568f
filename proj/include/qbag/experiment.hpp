#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qbag/loop.hpp"

namespace qbag {

/// Held-out instances labeled by the noise-free oracle. Test points are
/// removed from the unlabeled pool before any run starts, so no arm can ever
/// query them.
struct TestSet {
    std::vector<LabeledInstance> instances;
};

/// Draws `size` points uniformly without replacement from pool.unlabeled,
/// labels them with the (noise-free) oracle, and removes them from the pool.
TestSet make_test_set(Pool& pool, int size, Oracle& oracle, std::uint64_t seed);

/// Fraction of test instances where the committee's majority vote matches
/// the stored label.
double evaluate(const Committee& committee, const TestSet& test);

/// Quantile by linear interpolation between order statistics (q in [0,1]).
double quantile(std::vector<double> values, double q);

struct AccuracyCurve {
    struct Raw {
        Strategy strategy;
        std::uint64_t seed;
        int round;
        long labels;
        double accuracy;
    };
    struct Agg {
        Strategy strategy;
        int round;
        long labels;
        double median, q25, q75;
        int runs;
    };
    std::vector<Raw> raw;
    std::vector<Agg> agg;
    bool complete = true;  // false when any run failed and was skipped
};

struct RunStatus {
    Strategy strategy;
    std::uint64_t seed;
    bool completed = false;
    bool pending = false;  // an external labeler timed out mid-run
    std::string error;
    std::vector<RoundRecord> records;
    Committee committee;  // final stage (valid when completed)
    Pool pool;            // final snapshot (valid when completed)
};

struct ComparisonConfig {
    LoopConfig base;               // per-run seed is overridden internally
    std::vector<Strategy> strategies;
    std::vector<std::uint64_t> seeds;
    OracleSpec oracle;
    int dimension = 2;
    int grid_resolution = 101;
    int test_size = 212;
    std::uint64_t master_seed = 1;  // drives the shared test set
    std::string checkpoint_dir;     // empty disables checkpointing
    std::string digest;
    bool resume = false;
};

struct ComparisonResult {
    AccuracyCurve curve;
    std::vector<RunStatus> runs;
    TestSet test;
};

/// One experiment per (strategy, seed), all sharing one grid pool minus one
/// held-out test set. Initial pools are matched across strategies for a given
/// seed. Failed runs are recorded and skipped in the aggregate.
ComparisonResult run_comparison(const ComparisonConfig& cfg);

/// Aggregates raw curve points into per-(strategy, round) median and
/// quartiles.
void aggregate_curve(AccuracyCurve& curve);

/// Smallest labels_total at which accuracy reaches `target` for the given
/// (strategy, seed) trace; +infinity when never reached.
double labels_to_reach(const std::vector<AccuracyCurve::Raw>& raw, Strategy strategy,
                       std::uint64_t seed, double target);

struct MapSlice {
    int axis = -1;  // 0-based coordinate index to hold fixed
    double value = 0.5;
};

/// Dense grid of committee predictions as CSV rows "x1,...,xd,label".
/// 2d committees take no slice; 3d committees require exactly one fixed
/// coordinate.
void export_map(std::ostream& out, const Committee& committee, int resolution,
                const std::optional<MapSlice>& slice, std::string_view comment = {});

/// Same raster, labeled by an oracle instead of a committee.
void export_oracle_map(std::ostream& out, Oracle& oracle, int dimension, int resolution,
                       const std::optional<MapSlice>& slice, std::string_view comment = {});

void write_curves_raw_csv(std::ostream& out, const AccuracyCurve& curve,
                          std::string_view digest);
void write_curves_agg_csv(std::ostream& out, const AccuracyCurve& curve,
                          std::string_view digest);
void write_batch_log_csv(std::ostream& out, const std::vector<RoundRecord>& records,
                         int dimension, std::string_view digest);

}  // namespace qbag
