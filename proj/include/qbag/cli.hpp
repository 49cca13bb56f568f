#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qbag/config.hpp"
#include "qbag/ensemble.hpp"

namespace qbag::cli {

// Exit codes: 0 complete, 1 config/usage error, 2 partial completion,
// 3 oracle timeout.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitPartial = 2;
inline constexpr int kExitOracleTimeout = 3;

int run_main(int argc, const char* const* argv);

/// `run`: executes the configured comparison and writes curves, per-run
/// artifacts, and the manifest under cfg.out. Pass a directory as `resume`
/// to continue an interrupted invocation with the same config.
int cmd_run(EngineConfig cfg, const std::string& resume);

struct AuditParams {
    int committee_size = 20;
    TrainConfig train;
    int cv_k = 10;
    int num_classes = 5;
    int hidden_start = 4;
    std::uint64_t seed = 1;
};

struct AuditRow {
    LabeledInstance instance;
    int predicted = 0;
    int votes_stored = 0;
    int votes_top = 0;
};

/// Trains a committee on the labeled pool (hidden units adapted to a fixed
/// point) and reports every instance whose stored label loses the vote.
std::vector<AuditRow> audit_labeled_pool(const std::vector<LabeledInstance>& labeled,
                                         const AuditParams& params);

}  // namespace qbag::cli
