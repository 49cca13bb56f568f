#include "qbag/cli.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "qbag/csv.hpp"
#include "qbag/errors.hpp"
#include "qbag/kernels.hpp"
#include "qbag/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace qbag::cli {

namespace {

std::string iso_now() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write " + path.string());
    body(out);
}

std::string run_tag(Strategy s, std::uint64_t seed) {
    return std::string(strategy_name(s)) + "-s" + std::to_string(seed);
}

void apply_cli_settings(EngineConfig& cfg, const std::vector<std::string>& settings) {
    for (const auto& kv : settings) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
}

std::optional<MapSlice> parse_slice(const std::string& text) {
    if (text.empty()) return std::nullopt;
    // Accepts "x3=0.5".
    if (text.size() < 4 || text[0] != 'x')
        throw ConfigError("--slice expects x<axis>=<value>, got '" + text + "'");
    auto eq = text.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--slice expects x<axis>=<value>, got '" + text + "'");
    MapSlice slice;
    slice.axis = static_cast<int>(csv::parse_long(text.substr(1, eq - 1), "slice axis")) - 1;
    slice.value = csv::parse_double(text.substr(eq + 1), "slice value");
    return slice;
}

}  // namespace

int cmd_run(EngineConfig cfg, const std::string& resume) {
    if (!resume.empty()) cfg.out = resume;
    finalize_config(cfg);
    kernels::set_jobs(cfg.jobs);

    ComparisonConfig cc = to_comparison_config(cfg);
    if (cfg.checkpoint) cc.checkpoint_dir = (fs::path(cfg.out) / "checkpoints").string();
    cc.resume = !resume.empty();

    const std::string started = iso_now();
    fs::create_directories(cfg.out);
    ComparisonResult result = run_comparison(cc);

    std::vector<std::string> outputs;
    auto emit = [&](const fs::path& rel, const std::function<void(std::ostream&)>& body) {
        write_file(fs::path(cfg.out) / rel, body);
        outputs.push_back(rel.string());
    };

    emit("curves_raw.csv",
         [&](std::ostream& o) { write_curves_raw_csv(o, result.curve, cc.digest); });
    emit("curves_agg.csv",
         [&](std::ostream& o) { write_curves_agg_csv(o, result.curve, cc.digest); });

    for (const auto& run : result.runs) {
        if (!run.completed) continue;
        const fs::path dir = fs::path("runs") / run_tag(run.strategy, run.seed);
        emit(dir / "batches.csv", [&](std::ostream& o) {
            write_batch_log_csv(o, run.records, cc.dimension, cc.digest);
        });
        emit(dir / "pool.csv", [&](std::ostream& o) {
            write_pool_csv(o, run.pool, "config=" + cc.digest);
        });
        emit(dir / "committee.txt",
             [&](std::ostream& o) { save_committee(o, run.committee); });
    }

    json manifest;
    manifest["digest"] = cc.digest;
    manifest["started"] = started;
    manifest["finished"] = iso_now();
    manifest["outputs"] = outputs;
    manifest["runs"] = json::array();
    int failed = 0, pending = 0;
    for (const auto& run : result.runs) {
        json j;
        j["strategy"] = std::string(strategy_name(run.strategy));
        j["seed"] = run.seed;
        j["status"] = run.completed ? "complete" : (run.pending ? "pending" : "failed");
        j["rounds"] = run.records.size();
        if (!run.error.empty()) j["error"] = run.error;
        manifest["runs"].push_back(j);
        if (!run.completed) {
            ++failed;
            if (run.pending) ++pending;
        }
    }
    write_file(fs::path(cfg.out) / "manifest.json",
               [&](std::ostream& o) { o << manifest.dump(2) << "\n"; });

    for (const auto& run : result.runs)
        if (!run.completed)
            std::cerr << "run " << run_tag(run.strategy, run.seed) << " "
                      << (run.pending ? "pending" : "failed") << ": " << run.error << "\n";
    std::cout << "wrote " << outputs.size() + 1 << " files to " << cfg.out << " ("
              << result.runs.size() - static_cast<std::size_t>(failed) << "/"
              << result.runs.size() << " runs complete)\n";

    if (pending > 0) return kExitOracleTimeout;
    if (failed > 0) return kExitPartial;
    return kExitOk;
}

std::vector<AuditRow> audit_labeled_pool(const std::vector<LabeledInstance>& labeled,
                                         const AuditParams& params) {
    if (labeled.empty()) throw ConfigError("audit: the labeled pool is empty");

    // Grow the architecture to a cross-validation fixed point before judging
    // labels; a one-step adaptation from the starting width underfits pools
    // this command typically sees.
    int hidden = params.hidden_start;
    if (labeled.size() >= 2) {
        TrainConfig cv_cfg = params.train;
        cv_cfg.rng_seed = derive_seed(params.seed, "audit-cv");
        const int k = std::min<int>(params.cv_k, static_cast<int>(labeled.size()));
        for (int iter = 0; iter < 6; ++iter) {
            auto report = adapt_hidden_units(labeled, hidden, params.num_classes, k, cv_cfg);
            if (report.chosen == hidden) break;
            hidden = report.chosen;
        }
    }

    TrainConfig tc = params.train;
    tc.rng_seed = derive_seed(params.seed, "audit-train");
    Committee committee = train_committee(labeled, hidden, params.committee_size, 0,
                                          params.num_classes, tc);

    std::vector<AuditRow> rows;
    for (const auto& inst : labeled) {
        PointVote vote = committee_vote(committee, inst.features);
        const int winner = vote_winner(vote);
        if (winner == inst.label) continue;
        AuditRow row;
        row.instance = inst;
        row.predicted = winner;
        row.votes_stored = vote.tally.counts[static_cast<std::size_t>(inst.label)];
        row.votes_top = vote.tally.max_count();
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

int cmd_map_impl(const std::string& model_path, const std::string& oracle_name, int dimension,
                 int resolution, const std::string& slice_text, const std::string& out_path) {
    auto slice = parse_slice(slice_text);
    write_file(out_path, [&](std::ostream& o) {
        if (!model_path.empty()) {
            std::ifstream in(model_path);
            if (!in) throw LoadError("cannot open model file: " + model_path);
            Committee committee = load_committee(in);
            export_map(o, committee, resolution, slice, "source=" + model_path);
        } else {
            OracleSpec spec;
            spec.kind = oracle_kind_from_name(oracle_name);
            if (spec.kind == OracleKind::External)
                throw ConfigError("map --oracle: only synthetic oracles can be rasterized");
            const int d = spec.kind == OracleKind::Synthetic3d ? 3 : 2;
            if (dimension != 0 && dimension != d)
                throw ConfigError("map: --dimension disagrees with the oracle kind");
            auto oracle = make_oracle(spec);
            export_oracle_map(o, *oracle, d, resolution, slice, "source=" + oracle_name);
        }
    });
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

int cmd_audit_impl(const std::string& pool_path, const AuditParams& params) {
    std::ifstream in(pool_path);
    if (!in) throw LoadError("cannot open pool snapshot: " + pool_path);
    Pool pool = read_pool_csv(in);
    if (pool.labeled.empty())
        throw ConfigError("audit: snapshot " + pool_path + " has no labeled rows");

    auto rows = audit_labeled_pool(pool.labeled, params);
    std::cout << "id";
    for (int d = 1; d <= pool.dimension; ++d) std::cout << ",x" << d;
    std::cout << ",stored,predicted,votes_stored,votes_top\n";
    for (const auto& row : rows) {
        std::cout << row.instance.id;
        for (double c : row.instance.features.coords) std::cout << ',' << csv::format_double(c);
        std::cout << ',' << row.instance.label << ',' << row.predicted << ','
                  << row.votes_stored << ',' << row.votes_top << "\n";
    }
    std::cerr << rows.size() << " suspect label(s) among " << pool.labeled.size()
              << " instances\n";
    return kExitOk;
}

}  // namespace

int run_main(int argc, const char* const* argv) {
    CLI::App app{"qbag: pool-based active learning with a bagged committee"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run the configured experiment comparison");
    std::string cfg_path, resume, strategy, seeds, oracle, dir, out;
    std::vector<std::string> settings;
    double noise = -1.0;
    int jobs = -1;
    run->add_option("--config", cfg_path, "key=value config file");
    run->add_option("--strategy", strategy, "comma-separated strategies (qbag,random,entropy)");
    run->add_option("--seeds", seeds, "seed list, e.g. 1..30 or 1,4,9");
    run->add_option("--jobs", jobs, "worker threads (0 = hardware)");
    run->add_option("--resume", resume, "output directory of the interrupted invocation");
    run->add_option("--oracle", oracle, "synthetic | synthetic2d | synthetic3d | external");
    run->add_option("--dir", dir, "external oracle handshake directory");
    run->add_option("--noise", noise, "label flip probability in [0,1)");
    run->add_option("--out", out, "output directory (default $QBAG_OUT or ./qbag_out)");
    run->add_option("--set", settings, "extra key=value overrides");

    // map
    auto* map = app.add_subcommand("map", "rasterize a committee or oracle to CSV");
    std::string model_path, map_oracle, slice_text, map_out = "map.csv";
    int resolution = 101, map_dimension = 0;
    map->add_option("--model", model_path, "committee file written by run");
    map->add_option("--oracle", map_oracle, "rasterize a synthetic oracle instead");
    map->add_option("--resolution", resolution, "points per axis (default 101)");
    map->add_option("--slice", slice_text, "fixed coordinate for 3d models, e.g. x3=0.5");
    map->add_option("--dimension", map_dimension, "expected dimension (oracle maps)");
    map->add_option("--out", map_out, "output CSV path");

    // audit
    auto* audit = app.add_subcommand("audit", "report labels the committee votes against");
    std::string pool_path, audit_cfg_path;
    std::vector<std::string> audit_settings;
    std::uint64_t audit_seed = 1;
    audit->add_option("--pool", pool_path, "pool snapshot CSV")->required();
    audit->add_option("--config", audit_cfg_path, "key=value config file");
    audit->add_option("--seed", audit_seed, "committee seed");
    audit->add_option("--set", audit_settings, "extra key=value overrides");

    try {
        app.parse(argc, argv);

        if (run->parsed()) {
            EngineConfig cfg =
                cfg_path.empty() ? EngineConfig{} : parse_config_file(cfg_path);
            if (!strategy.empty()) apply_setting(cfg, "strategies", strategy);
            if (!seeds.empty()) apply_setting(cfg, "seeds", seeds);
            if (jobs >= 0) cfg.jobs = jobs;
            if (!oracle.empty()) cfg.oracle = oracle;
            if (!dir.empty()) cfg.external_dir = dir;
            if (noise >= 0.0) cfg.noise = noise;
            if (!out.empty()) cfg.out = out;
            apply_cli_settings(cfg, settings);
            return cmd_run(std::move(cfg), resume);
        }
        if (map->parsed()) {
            if (model_path.empty() == map_oracle.empty())
                throw ConfigError("map: pass exactly one of --model or --oracle");
            return cmd_map_impl(model_path, map_oracle, map_dimension, resolution, slice_text,
                                map_out);
        }
        if (audit->parsed()) {
            EngineConfig cfg =
                audit_cfg_path.empty() ? EngineConfig{} : parse_config_file(audit_cfg_path);
            apply_cli_settings(cfg, audit_settings);
            AuditParams params;
            params.committee_size = cfg.committee_size;
            params.train = cfg.train;
            params.cv_k = cfg.cv_k;
            params.num_classes = cfg.num_classes;
            params.hidden_start = cfg.hidden_start;
            params.seed = audit_seed;
            return cmd_audit_impl(pool_path, params);
        }
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const PendingOracle& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOracleTimeout;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

}  // namespace qbag::cli
