#include "qbag/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "qbag/csv.hpp"
#include "qbag/errors.hpp"
#include "qbag/kernels.hpp"
#include "qbag/rng.hpp"

namespace fs = std::filesystem;

namespace qbag {

TestSet make_test_set(Pool& pool, int size, Oracle& oracle, std::uint64_t seed) {
    if (size < 0 || static_cast<std::size_t>(size) > pool.unlabeled.size())
        throw PoolExhausted("make_test_set: cannot hold out " + std::to_string(size) +
                            " of " + std::to_string(pool.unlabeled.size()) + " points");
    std::vector<int> idx(pool.unlabeled.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (int i = 0; i < size; ++i) {
        std::size_t j = static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(rng.uniform_below(idx.size() - static_cast<std::size_t>(i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(size));

    std::vector<FeatureVector> points;
    points.reserve(idx.size());
    for (int i : idx) points.push_back(pool.unlabeled[static_cast<std::size_t>(i)].features);
    auto labels = oracle.label_batch(points, 0);

    TestSet test;
    test.instances.reserve(idx.size());
    std::vector<char> taken(pool.unlabeled.size(), 0);
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const auto& up = pool.unlabeled[static_cast<std::size_t>(idx[j])];
        test.instances.push_back(
            LabeledInstance{up.id, up.features, labels[j], Provenance::Initial, 0});
        taken[static_cast<std::size_t>(idx[j])] = 1;
    }
    std::vector<UnlabeledPoint> rest;
    rest.reserve(pool.unlabeled.size() - idx.size());
    for (std::size_t i = 0; i < pool.unlabeled.size(); ++i)
        if (!taken[i]) rest.push_back(std::move(pool.unlabeled[i]));
    pool.unlabeled = std::move(rest);
    return test;
}

double evaluate(const Committee& committee, const TestSet& test) {
    if (test.instances.empty()) throw DomainError("evaluate: empty test set");
    const long correct = kernels::count_vote_correct(committee.members, test.instances);
    return static_cast<double>(correct) / static_cast<double>(test.instances.size());
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DomainError("quantile: empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    if (lo + 1 >= values.size()) return values.back();
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

void aggregate_curve(AccuracyCurve& curve) {
    curve.agg.clear();
    std::map<std::pair<int, int>, std::vector<const AccuracyCurve::Raw*>> groups;
    for (const auto& r : curve.raw)
        groups[{static_cast<int>(r.strategy), r.round}].push_back(&r);
    for (const auto& [key, rows] : groups) {
        AccuracyCurve::Agg a;
        a.strategy = static_cast<Strategy>(key.first);
        a.round = key.second;
        a.labels = rows.front()->labels;
        std::vector<double> acc;
        acc.reserve(rows.size());
        for (const auto* r : rows) acc.push_back(r->accuracy);
        a.median = quantile(acc, 0.5);
        a.q25 = quantile(acc, 0.25);
        a.q75 = quantile(acc, 0.75);
        a.runs = static_cast<int>(rows.size());
        curve.agg.push_back(a);
    }
}

double labels_to_reach(const std::vector<AccuracyCurve::Raw>& raw, Strategy strategy,
                       std::uint64_t seed, double target) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : raw)
        if (r.strategy == strategy && r.seed == seed && r.accuracy >= target)
            best = std::min(best, static_cast<double>(r.labels));
    return best;
}

ComparisonResult run_comparison(const ComparisonConfig& cfg) {
    Pool master = build_grid_pool(cfg.dimension, cfg.grid_resolution);

    // The committee is scored against the noise-free target even when the
    // training labels are noisy.
    OracleSpec test_spec = cfg.oracle;
    test_spec.noise_rate = 0.0;
    if (test_spec.kind == OracleKind::External)
        test_spec.external_dir = (fs::path(cfg.oracle.external_dir) / "test").string();
    auto test_oracle = make_oracle(test_spec);
    ComparisonResult result;
    result.test = make_test_set(master, cfg.test_size, *test_oracle,
                                derive_seed(cfg.master_seed, "test"));

    const int n_runs = static_cast<int>(cfg.strategies.size() * cfg.seeds.size());
    result.runs.resize(static_cast<std::size_t>(n_runs));

    if (!cfg.checkpoint_dir.empty()) fs::create_directories(cfg.checkpoint_dir);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int i = 0; i < n_runs; ++i) {
        const std::size_t si = static_cast<std::size_t>(i) / cfg.seeds.size();
        const std::size_t pi = static_cast<std::size_t>(i) % cfg.seeds.size();
        const Strategy strategy = cfg.strategies[si];
        const std::uint64_t seed = cfg.seeds[pi];

        RunStatus& status = result.runs[static_cast<std::size_t>(i)];
        status.strategy = strategy;
        status.seed = seed;
        try {
            LoopConfig run_cfg = cfg.base;
            run_cfg.strategy = strategy;
            // Keyed by the replication seed only, never the strategy, so all
            // arms of one seed share the same initial pool.
            run_cfg.seed = derive_seed(cfg.master_seed, "run", seed);
            run_cfg.num_classes = cfg.oracle.num_classes;

            OracleSpec run_spec = cfg.oracle;
            run_spec.noise_seed = derive_seed(run_cfg.seed, "noise");
            std::string tag =
                std::string(strategy_name(strategy)) + "-s" + std::to_string(seed);
            if (run_spec.kind == OracleKind::External)
                run_spec.external_dir = (fs::path(cfg.oracle.external_dir) / tag).string();
            auto oracle = make_oracle(run_spec);

            Evaluator evaluator = [&](const Committee& c) { return evaluate(c, result.test); };

            CheckpointOptions ckpt;
            std::string resume_from;
            if (!cfg.checkpoint_dir.empty()) {
                ckpt.path = (fs::path(cfg.checkpoint_dir) / (tag + ".ckpt")).string();
                ckpt.digest = cfg.digest;
                if (cfg.resume && fs::exists(ckpt.path)) resume_from = ckpt.path;
            }

            auto exp = run_experiment(run_cfg, master, *oracle, &evaluator, ckpt, resume_from);
            status.records = std::move(exp.records);
            status.committee = std::move(exp.committee);
            status.pool = std::move(exp.pool);
            status.completed = true;
        } catch (const PendingOracle& e) {
            status.pending = true;
            status.error = e.what();
        } catch (const std::exception& e) {
            status.error = e.what();
        }
    }

    for (const auto& status : result.runs) {
        if (!status.completed) {
            result.curve.complete = false;
            continue;
        }
        for (const auto& rec : status.records)
            result.curve.raw.push_back(AccuracyCurve::Raw{status.strategy, status.seed,
                                                          rec.round, rec.labels_total,
                                                          rec.test_accuracy});
    }
    aggregate_curve(result.curve);
    return result;
}

namespace {

void write_grid_rows(std::ostream& out, int dimension, int resolution,
                     const std::optional<MapSlice>& slice,
                     const std::function<int(const FeatureVector&)>& label_of) {
    if (dimension == 2) {
        if (slice) throw ConfigError("map: a 2d model takes no slice");
    } else if (dimension == 3) {
        if (!slice) throw ConfigError("map: a 3d model needs exactly one fixed coordinate");
        if (slice->axis < 0 || slice->axis > 2)
            throw ConfigError("map: slice axis out of range");
        if (slice->value < 0.0 || slice->value > 1.0)
            throw ConfigError("map: slice value outside [0,1]");
    } else {
        throw ConfigError("map: only 2d and 3d feature spaces are supported");
    }

    const std::int64_t rows =
        static_cast<std::int64_t>(resolution) * static_cast<std::int64_t>(resolution);
    if (rows > kDefaultPoolCap) throw SizeError("map: resolution too large");

    out << "x1";
    for (int d = 2; d <= dimension; ++d) out << ",x" << d;
    out << ",label\n";

    int free_axis[2] = {0, 1};
    if (dimension == 3) {
        int j = 0;
        for (int d = 0; d < 3; ++d)
            if (d != slice->axis) free_axis[j++] = d;
    }
    FeatureVector v;
    v.coords.assign(static_cast<std::size_t>(dimension), 0.0);
    if (dimension == 3) v.coords[static_cast<std::size_t>(slice->axis)] = slice->value;
    for (int i = 0; i < resolution; ++i) {
        v.coords[static_cast<std::size_t>(free_axis[0])] =
            static_cast<double>(i) / (resolution - 1);
        for (int j = 0; j < resolution; ++j) {
            v.coords[static_cast<std::size_t>(free_axis[1])] =
                static_cast<double>(j) / (resolution - 1);
            const int label = label_of(v);
            for (int d = 0; d < dimension; ++d) {
                if (d) out << ',';
                out << csv::format_double(v.coords[static_cast<std::size_t>(d)]);
            }
            out << ',' << label << "\n";
        }
    }
}

}  // namespace

void export_map(std::ostream& out, const Committee& committee, int resolution,
                const std::optional<MapSlice>& slice, std::string_view comment) {
    if (!comment.empty()) out << "# " << comment << "\n";
    write_grid_rows(out, committee.input_dim(), resolution, slice,
                    [&](const FeatureVector& v) { return committee_predict(committee, v); });
}

void export_oracle_map(std::ostream& out, Oracle& oracle, int dimension, int resolution,
                       const std::optional<MapSlice>& slice, std::string_view comment) {
    if (!comment.empty()) out << "# " << comment << "\n";
    write_grid_rows(out, dimension, resolution, slice, [&](const FeatureVector& v) {
        return oracle.label_batch({v}, 0).front();
    });
}

void write_curves_raw_csv(std::ostream& out, const AccuracyCurve& curve,
                          std::string_view digest) {
    if (!digest.empty()) out << "# config=" << digest << "\n";
    out << "strategy,seed,round,labels,accuracy\n";
    for (const auto& r : curve.raw) {
        out << strategy_name(r.strategy) << ',' << r.seed << ',' << r.round << ',' << r.labels
            << ',';
        if (r.accuracy >= 0.0) out << csv::format_double(r.accuracy);
        out << "\n";
    }
}

void write_curves_agg_csv(std::ostream& out, const AccuracyCurve& curve,
                          std::string_view digest) {
    if (!digest.empty()) out << "# config=" << digest << "\n";
    out << "strategy,round,labels,median,q25,q75\n";
    for (const auto& a : curve.agg)
        out << strategy_name(a.strategy) << ',' << a.round << ',' << a.labels << ','
            << csv::format_double(a.median) << ',' << csv::format_double(a.q25) << ','
            << csv::format_double(a.q75) << "\n";
}

void write_batch_log_csv(std::ostream& out, const std::vector<RoundRecord>& records,
                         int dimension, std::string_view digest) {
    if (!digest.empty()) out << "# config=" << digest << "\n";
    out << "round,strategy,kind";
    for (int d = 1; d <= dimension; ++d) out << ",x" << d;
    out << "\n";
    for (const auto& rec : records) {
        auto write_picks = [&](const std::vector<Pick>& picks, std::string_view kind) {
            for (const auto& p : picks) {
                out << rec.round << ',' << strategy_name(rec.batch.strategy) << ',' << kind;
                for (double c : p.features.coords) out << ',' << csv::format_double(c);
                out << "\n";
            }
        };
        std::string_view primary_kind = "disagreement";
        if (rec.batch.strategy == Strategy::Random) primary_kind = "random";
        if (rec.batch.strategy == Strategy::Entropy) primary_kind = "entropy";
        write_picks(rec.batch.disagreement_picks, primary_kind);
        write_picks(rec.batch.exploratory_picks, "exploratory");
    }
}

}  // namespace qbag
