#include "qbag/loop.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "qbag/csv.hpp"
#include "qbag/errors.hpp"
#include "qbag/rng.hpp"

namespace qbag {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void initialize(Pool& pool, int initial_size, Oracle& oracle, std::uint64_t seed) {
    if (initial_size == 0) return;
    if (initial_size < 0 ||
        static_cast<std::size_t>(initial_size) > pool.unlabeled.size())
        throw PoolExhausted("initialize: cannot draw " + std::to_string(initial_size) +
                            " points from a pool of " +
                            std::to_string(pool.unlabeled.size()));

    std::vector<int> idx(pool.unlabeled.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (int i = 0; i < initial_size; ++i) {
        std::size_t j = static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(rng.uniform_below(idx.size() - static_cast<std::size_t>(i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(initial_size));

    std::vector<FeatureVector> points;
    points.reserve(idx.size());
    for (int i : idx) points.push_back(pool.unlabeled[static_cast<std::size_t>(i)].features);
    auto labels = oracle.label_batch(points, 0);
    move_to_labeled(pool, idx, labels, Provenance::Initial, 0);
}

RoundRecord train_stage(LoopState& state, const LoopConfig& cfg, int stage,
                        const Evaluator* evaluator) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& labeled = state.pool.labeled;
    if (labeled.empty()) throw DomainError("train_stage: empty labeled pool");

    if (cfg.fixed_hidden_units > 0) {
        state.hidden_units = cfg.fixed_hidden_units;
    } else if (labeled.size() >= 2) {
        TrainConfig cv_cfg = cfg.train;
        cv_cfg.rng_seed = derive_seed(cfg.seed, "cv", static_cast<std::uint64_t>(stage));
        const int k = std::min<int>(cfg.cv_k, static_cast<int>(labeled.size()));
        auto report =
            adapt_hidden_units(labeled, state.hidden_units, cfg.num_classes, k, cv_cfg);
        state.hidden_units = report.chosen;
    }

    TrainConfig stage_cfg = cfg.train;
    stage_cfg.rng_seed = derive_seed(cfg.seed, "train", static_cast<std::uint64_t>(stage));
    state.committee = train_committee(labeled, state.hidden_units, cfg.committee_size,
                                      cfg.subsample_size, cfg.num_classes, stage_cfg);
    state.votes = committee_votes_over(state.committee, state.pool.unlabeled);
    state.stage_ready = true;

    RoundRecord rec;
    rec.round = stage;
    rec.labels_total = static_cast<long>(labeled.size());
    rec.hidden_units = state.hidden_units;
    rec.disagreement_size = static_cast<long>(disagreement_indices(state.votes).size());
    rec.batch.strategy = cfg.strategy;
    if (evaluator && *evaluator) rec.test_accuracy = (*evaluator)(state.committee);
    rec.wall_seconds = seconds_since(t0);
    return rec;
}

namespace {

// Moves all picks of a plan from U to L in one pass, preserving pick order
// and tagging provenance per pick kind.
void apply_batch(Pool& pool, const BatchPlan& plan, const std::vector<int>& labels,
                 int round) {
    std::unordered_map<long, int> index_of;
    index_of.reserve(pool.unlabeled.size());
    for (std::size_t i = 0; i < pool.unlabeled.size(); ++i)
        index_of[pool.unlabeled[i].id] = static_cast<int>(i);

    struct Move {
        int index;
        int label;
        Provenance provenance;
    };
    std::vector<Move> moves;
    moves.reserve(labels.size());
    std::size_t li = 0;
    auto add = [&](const std::vector<Pick>& picks, Provenance prov) {
        for (const auto& p : picks) {
            auto it = index_of.find(p.id);
            if (it == index_of.end())
                throw DomainError("apply_batch: pick id " + std::to_string(p.id) +
                                  " is not unlabeled");
            moves.push_back(Move{it->second, labels[li++], prov});
        }
    };
    const Provenance primary = plan.strategy == Strategy::Random
                                   ? Provenance::RandomQuery
                                   : Provenance::DisagreementQuery;
    add(plan.disagreement_picks, primary);
    add(plan.exploratory_picks, Provenance::ExploratoryQuery);

    std::vector<char> taken(pool.unlabeled.size(), 0);
    for (const auto& mv : moves) {
        taken[static_cast<std::size_t>(mv.index)] = 1;
        const auto& up = pool.unlabeled[static_cast<std::size_t>(mv.index)];
        pool.labeled.push_back(LabeledInstance{up.id, up.features, mv.label, mv.provenance, round});
    }
    std::vector<UnlabeledPoint> rest;
    rest.reserve(pool.unlabeled.size() - moves.size());
    for (std::size_t i = 0; i < pool.unlabeled.size(); ++i)
        if (!taken[i]) rest.push_back(std::move(pool.unlabeled[i]));
    pool.unlabeled = std::move(rest);
}

}  // namespace

RoundRecord run_round(LoopState& state, const LoopConfig& cfg, Oracle& oracle,
                      const Evaluator* evaluator) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!state.stage_ready) throw DomainError("run_round: stage committee not trained");
    if (state.pool.unlabeled.empty())
        throw PoolExhausted("run_round: unlabeled pool is empty");

    const int round = state.next_round;
    const int n_b = std::min<int>(cfg.batch_size, static_cast<int>(state.pool.unlabeled.size()));
    const int n_e = std::min<int>(cfg.exploratory, n_b);

    BatchPlan plan;
    switch (cfg.strategy) {
        case Strategy::QBag:
            plan = qbag_batch(state.pool, state.votes, n_b, n_e, cfg.anchor_includes_batch);
            break;
        case Strategy::Random:
            plan = random_batch(state.pool, n_b,
                                derive_seed(cfg.seed, "batch", static_cast<std::uint64_t>(round)));
            break;
        case Strategy::Entropy:
            plan = entropy_batch(state.pool, state.votes, n_b);
            break;
    }

    std::vector<FeatureVector> query;
    query.reserve(static_cast<std::size_t>(plan.total()));
    for (const auto& p : plan.disagreement_picks) query.push_back(p.features);
    for (const auto& p : plan.exploratory_picks) query.push_back(p.features);
    auto labels = oracle.label_batch(query, round);

    apply_batch(state.pool, plan, labels, round);
    state.next_round = round + 1;

    RoundRecord rec = train_stage(state, cfg, round, evaluator);
    rec.batch = std::move(plan);
    rec.wall_seconds = seconds_since(t0);
    return rec;
}

ExperimentResult run_experiment(const LoopConfig& cfg, Pool pool, Oracle& oracle,
                                const Evaluator* evaluator, const CheckpointOptions& ckpt,
                                const std::string& resume_from) {
    if (cfg.exploratory > cfg.batch_size)
        throw ConfigError("run_experiment: exploratory count exceeds batch size");

    LoopState state;
    std::vector<RoundRecord> records;

    if (!resume_from.empty()) {
        Checkpoint loaded = load_checkpoint(resume_from);
        if (!ckpt.digest.empty() && !loaded.digest.empty() && ckpt.digest != loaded.digest)
            throw ConfigError("resume: checkpoint digest " + loaded.digest +
                              " does not match config digest " + ckpt.digest);
        state = std::move(loaded.state);
        records = std::move(loaded.records);
        if (auto* noisy = dynamic_cast<NoisyOracle*>(&oracle))
            noisy->set_sequence(loaded.oracle_sequence);
        if (state.stage_ready)
            state.votes = committee_votes_over(state.committee, state.pool.unlabeled);
    } else {
        state.pool = std::move(pool);
        state.hidden_units = cfg.hidden_start;
        initialize(state.pool, cfg.initial_size, oracle, derive_seed(cfg.seed, "init"));
        records.push_back(train_stage(state, cfg, 0, evaluator));
    }

    auto maybe_checkpoint = [&]() {
        if (ckpt.path.empty()) return;
        Checkpoint c;
        c.digest = ckpt.digest;
        c.state = state;
        c.records = records;
        if (auto* noisy = dynamic_cast<NoisyOracle*>(&oracle)) c.oracle_sequence = noisy->sequence();
        save_checkpoint(ckpt.path, c);
    };
    if (resume_from.empty()) maybe_checkpoint();

    for (int round = state.next_round; round <= cfg.rounds; ++round) {
        if (state.pool.unlabeled.empty()) break;  // pool exhausted: end cleanly
        records.push_back(run_round(state, cfg, oracle, evaluator));
        maybe_checkpoint();
    }
    return ExperimentResult{std::move(state.committee), std::move(records),
                            std::move(state.pool)};
}

namespace {

void write_record(std::ostream& out, const RoundRecord& rec) {
    out << "record," << rec.round << ',' << rec.labels_total << ',' << rec.hidden_units << ','
        << rec.disagreement_size << ',' << csv::format_double(rec.test_accuracy) << ','
        << csv::format_double(rec.wall_seconds) << ',' << strategy_name(rec.batch.strategy)
        << ',' << rec.batch.shortfall << ',' << rec.batch.disagreement_picks.size() << ','
        << rec.batch.exploratory_picks.size() << "\n";
    auto write_pick = [&](const Pick& p) {
        out << "pick," << p.id;
        for (double c : p.features.coords) out << ',' << csv::format_double(c);
        out << "\n";
    };
    for (const auto& p : rec.batch.disagreement_picks) write_pick(p);
    for (const auto& p : rec.batch.exploratory_picks) write_pick(p);
}

RoundRecord read_record(std::istream& in, const std::string& header_line) {
    auto fields = csv::split_line(header_line);
    if (fields.size() != 11 || fields[0] != "record")
        throw LoadError("checkpoint: bad record line '" + header_line + "'");
    RoundRecord rec;
    rec.round = static_cast<int>(csv::parse_long(fields[1], "record round"));
    rec.labels_total = csv::parse_long(fields[2], "record labels");
    rec.hidden_units = static_cast<int>(csv::parse_long(fields[3], "record hidden"));
    rec.disagreement_size = csv::parse_long(fields[4], "record |D|");
    rec.test_accuracy = csv::parse_double(fields[5], "record accuracy");
    rec.wall_seconds = csv::parse_double(fields[6], "record wall");
    rec.batch.strategy = strategy_from_name(fields[7]);
    rec.batch.shortfall = static_cast<int>(csv::parse_long(fields[8], "record shortfall"));
    const long nq = csv::parse_long(fields[9], "record pick count");
    const long ne = csv::parse_long(fields[10], "record pick count");
    auto read_pick = [&](std::vector<Pick>& into) {
        std::string line;
        if (!std::getline(in, line)) throw LoadError("checkpoint: truncated pick list");
        auto pf = csv::split_line(line);
        if (pf.size() < 3 || pf[0] != "pick")
            throw LoadError("checkpoint: bad pick line '" + line + "'");
        Pick p;
        p.id = csv::parse_long(pf[1], "pick id");
        for (std::size_t i = 2; i < pf.size(); ++i)
            p.features.coords.push_back(csv::parse_double(pf[i], "pick coordinate"));
        into.push_back(std::move(p));
    };
    for (long i = 0; i < nq; ++i) read_pick(rec.batch.disagreement_picks);
    for (long i = 0; i < ne; ++i) read_pick(rec.batch.exploratory_picks);
    return rec;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp(path + ".tmp");
    {
        std::ofstream out(tmp);
        if (!out) throw LoadError("cannot write checkpoint: " + path);
        out << "qbag-checkpoint,1\n";
        out << "digest," << ckpt.digest << "\n";
        out << "next_round," << ckpt.state.next_round << "\n";
        out << "hidden," << ckpt.state.hidden_units << "\n";
        out << "stage_ready," << (ckpt.state.stage_ready ? 1 : 0) << "\n";
        out << "oracle_seq," << ckpt.oracle_sequence << "\n";
        out << "records," << ckpt.records.size() << "\n";
        for (const auto& rec : ckpt.records) write_record(out, rec);
        out << "pool," << ckpt.state.pool.labeled.size() << ','
            << ckpt.state.pool.unlabeled.size() << "\n";
        write_pool_csv(out, ckpt.state.pool);
        if (ckpt.state.stage_ready) save_committee(out, ckpt.state.committee);
    }
    fs::rename(tmp, target);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open checkpoint: " + path);
    std::string line;
    auto expect = [&](const char* key) -> std::string {
        if (!std::getline(in, line)) throw LoadError("checkpoint: truncated at " + std::string(key));
        auto fields = csv::split_line(line);
        if (fields.size() < 2 || fields[0] != key)
            throw LoadError("checkpoint: expected '" + std::string(key) + "', got '" + line + "'");
        return fields[1];
    };

    if (!std::getline(in, line) || line != "qbag-checkpoint,1")
        throw LoadError("checkpoint: unrecognized format");
    Checkpoint ckpt;
    ckpt.digest = expect("digest");
    ckpt.state.next_round = static_cast<int>(csv::parse_long(expect("next_round"), "next_round"));
    ckpt.state.hidden_units = static_cast<int>(csv::parse_long(expect("hidden"), "hidden"));
    ckpt.state.stage_ready = csv::parse_long(expect("stage_ready"), "stage_ready") != 0;
    ckpt.oracle_sequence =
        static_cast<std::uint64_t>(csv::parse_u64(expect("oracle_seq"), "oracle_seq"));
    const long n_records = csv::parse_long(expect("records"), "records");
    for (long i = 0; i < n_records; ++i) {
        if (!std::getline(in, line)) throw LoadError("checkpoint: truncated record list");
        ckpt.records.push_back(read_record(in, line));
    }

    if (!std::getline(in, line)) throw LoadError("checkpoint: truncated at pool");
    const auto pool_counts = csv::split_line(line);
    if (pool_counts.size() != 3 || pool_counts[0] != "pool")
        throw LoadError("checkpoint: expected pool counts, got '" + line + "'");
    const long n_labeled = csv::parse_long(pool_counts[1], "pool labeled count");

    // The remainder is a pool CSV block of a known row count followed by an
    // optional committee block, so the pool is streamed into a buffer first.
    std::ostringstream pool_buf;
    if (!std::getline(in, line)) throw LoadError("checkpoint: missing pool header");
    pool_buf << line << "\n";
    const long total_rows =
        n_labeled + csv::parse_long(pool_counts[2], "pool unlabeled count");
    for (long i = 0; i < total_rows; ++i) {
        if (!std::getline(in, line)) throw LoadError("checkpoint: truncated pool block");
        pool_buf << line << "\n";
    }
    std::istringstream pool_in(pool_buf.str());
    ckpt.state.pool = read_pool_csv(pool_in);

    if (ckpt.state.stage_ready) ckpt.state.committee = load_committee(in);
    return ckpt;
}

}  // namespace qbag
