#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qbag/domain.hpp"
#include "qbag/ensemble.hpp"
#include "qbag/mlp.hpp"
#include "qbag/oracle.hpp"
#include "qbag/sampling.hpp"

namespace qbag {

struct LoopConfig {
    int rounds = 6;            // N
    int batch_size = 32;       // n_b
    int exploratory = 4;       // n_e
    int committee_size = 20;   // n_c
    int subsample_size = 0;    // m_c; 0 means |L| each round
    int initial_size = 20;
    Strategy strategy = Strategy::QBag;
    TrainConfig train;
    int cv_k = 10;
    int num_classes = 5;
    int hidden_start = 4;
    int fixed_hidden_units = 0;  // 0 = adapt by cross-validation each round
    bool anchor_includes_batch = true;
    std::uint64_t seed = 1;
};

/// Audit trail for one round. A round queries with the committee of the
/// previous stage and then trains the next stage on the enlarged pool, so
/// hidden_units / disagreement_size / test_accuracy all describe the
/// committee trained on exactly labels_total points. Round 0 is the stage
/// trained on the initial pool (empty batch).
struct RoundRecord {
    int round = 0;
    long labels_total = 0;
    int hidden_units = 0;
    long disagreement_size = 0;
    BatchPlan batch;
    double test_accuracy = -1.0;  // negative when no evaluator was supplied
    double wall_seconds = 0.0;
};

using Evaluator = std::function<double(const Committee&)>;

/// Mutable state threaded through rounds; checkpointable.
struct LoopState {
    Pool pool;
    Committee committee;
    std::vector<PointVote> votes;  // current committee over pool.unlabeled
    int hidden_units = 4;
    int next_round = 1;
    bool stage_ready = false;
};

/// Draws initial_size points uniformly without replacement from U, labels
/// them, and moves them to L with provenance "initial", round 0.
void initialize(Pool& pool, int initial_size, Oracle& oracle, std::uint64_t seed);

/// Trains the stage committee on the current labeled pool (cross-validated
/// hidden-unit adaptation unless fixed) and caches its votes over U.
/// Returns the record describing the stage.
RoundRecord train_stage(LoopState& state, const LoopConfig& cfg, int stage,
                        const Evaluator* evaluator);

/// One full round: select a batch with the current committee, query the
/// oracle, move the batch into L, then train the next stage. Throws
/// PoolExhausted when fewer unlabeled points remain than a full batch;
/// a truncated final batch is taken instead when at least one point remains.
RoundRecord run_round(LoopState& state, const LoopConfig& cfg, Oracle& oracle,
                      const Evaluator* evaluator);

struct ExperimentResult {
    Committee committee;
    std::vector<RoundRecord> records;
    Pool pool;  // final state, labeled plus remaining unlabeled
};

struct CheckpointOptions {
    std::string path;        // empty disables checkpointing
    std::string digest;      // config digest stored and verified on resume
};

/// Runs the initial stage plus cfg.rounds query rounds. With a checkpoint
/// path set, state is persisted after every round; pass `resume_from` to
/// continue an interrupted run (records for completed rounds are reloaded
/// from the checkpoint).
ExperimentResult run_experiment(const LoopConfig& cfg, Pool pool, Oracle& oracle,
                                const Evaluator* evaluator,
                                const CheckpointOptions& ckpt = {},
                                const std::string& resume_from = {});

struct Checkpoint {
    std::string digest;
    LoopState state;
    std::uint64_t oracle_sequence = 0;
    std::vector<RoundRecord> records;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace qbag
