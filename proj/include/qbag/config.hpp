#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qbag/experiment.hpp"

namespace qbag {

/// Effective engine configuration: flat key=value file plus command-line
/// overrides, with dimension-dependent defaults filled in by
/// finalize_config(). Zero / negative sentinels mean "defaulted".
struct EngineConfig {
    int dimension = 2;
    int num_classes = 5;
    int grid_resolution = 0;  // default: 101 in 2d, 41 in 3d
    int test_size = 0;        // default: 212 in 2d, 468 in 3d
    std::vector<Strategy> strategies{Strategy::QBag, Strategy::Random};
    std::vector<std::uint64_t> seeds{1};
    int rounds = -1;      // default: 6 in 2d, 7 in 3d
    int batch_size = 0;   // default: 32 in 2d, 64 in 3d
    int exploratory = -1;  // default: batch_size / 8
    int committee_size = 20;
    int subsample_size = 0;  // 0 = |L|
    int initial_size = 20;
    int cv_k = 10;
    TrainConfig train;
    int hidden_start = 4;
    int fixed_hidden_units = 0;
    bool anchor_includes_batch = true;
    std::string oracle = "synthetic";  // synthetic | synthetic2d | synthetic3d | external
    double noise = 0.0;
    std::string external_dir;
    double oracle_timeout_s = 3600.0;
    double poll_interval_ms = 50.0;
    Bounds bounds;  // empty = unit bounds
    std::uint64_t seed = 1;
    std::string out;  // default: $QBAG_OUT or ./qbag_out
    int jobs = 0;
    bool checkpoint = true;
};

/// "1..30", "1,4,9", or a mix ("1..3,7").
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

std::vector<Strategy> parse_strategy_list(const std::string& text);

/// "0:1;1400:2200" — one lo:hi pair per axis.
Bounds parse_bounds(const std::string& text);

EngineConfig parse_config_file(const std::string& path);

/// Applies one key=value pair; throws ConfigError naming the key on any
/// unknown key or unparsable value.
void apply_setting(EngineConfig& cfg, const std::string& key, const std::string& value);

/// Fills dimension-dependent defaults and validates everything.
void finalize_config(EngineConfig& cfg);

/// Canonical key=value rendering of the experiment-defining fields
/// (execution knobs like out/jobs excluded).
std::string canonical_config(const EngineConfig& cfg);

/// FNV-1a hash of canonical_config, 16 hex digits.
std::string config_digest(const EngineConfig& cfg);

OracleKind resolved_oracle_kind(const EngineConfig& cfg);

ComparisonConfig to_comparison_config(const EngineConfig& cfg);

}  // namespace qbag
