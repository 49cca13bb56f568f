#include "qbag/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qbag/csv.hpp"
#include "qbag/errors.hpp"

namespace qbag {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep)) parts.push_back(trim(part));
    return parts;
}

long to_long(const std::string& key, const std::string& value) {
    try {
        return csv::parse_long(value, key);
    } catch (const LoadError& e) {
        throw ConfigError(std::string("config ") + e.what());
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        return csv::parse_double(value, key);
    } catch (const LoadError& e) {
        throw ConfigError(std::string("config ") + e.what());
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("config " + key + ": expected a boolean, got '" + value + "'");
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    for (const auto& part : split(text, ',')) {
        if (part.empty()) throw ConfigError("seeds: empty element in '" + text + "'");
        auto dots = part.find("..");
        if (dots == std::string::npos) {
            seeds.push_back(static_cast<std::uint64_t>(to_long("seeds", part)));
        } else {
            long lo = to_long("seeds", part.substr(0, dots));
            long hi = to_long("seeds", part.substr(dots + 2));
            if (lo > hi) throw ConfigError("seeds: descending range '" + part + "'");
            for (long s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
        }
    }
    if (seeds.empty()) throw ConfigError("seeds: empty list");
    return seeds;
}

std::vector<Strategy> parse_strategy_list(const std::string& text) {
    std::vector<Strategy> strategies;
    for (const auto& part : split(text, ','))
        strategies.push_back(strategy_from_name(part));
    if (strategies.empty()) throw ConfigError("strategies: empty list");
    return strategies;
}

Bounds parse_bounds(const std::string& text) {
    Bounds bounds;
    for (const auto& part : split(text, ';')) {
        auto colon = part.find(':');
        if (colon == std::string::npos)
            throw ConfigError("bounds: expected lo:hi, got '" + part + "'");
        AxisBounds b;
        b.lo = to_double("bounds", part.substr(0, colon));
        b.hi = to_double("bounds", part.substr(colon + 1));
        bounds.push_back(b);
    }
    return bounds;
}

void apply_setting(EngineConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "dimension") cfg.dimension = static_cast<int>(to_long(key, value));
    else if (key == "classes") cfg.num_classes = static_cast<int>(to_long(key, value));
    else if (key == "grid_resolution") cfg.grid_resolution = static_cast<int>(to_long(key, value));
    else if (key == "test_size") cfg.test_size = static_cast<int>(to_long(key, value));
    else if (key == "strategies" || key == "strategy") cfg.strategies = parse_strategy_list(value);
    else if (key == "seeds") cfg.seeds = parse_seed_list(value);
    else if (key == "rounds") cfg.rounds = static_cast<int>(to_long(key, value));
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(to_long(key, value));
    else if (key == "exploratory") cfg.exploratory = static_cast<int>(to_long(key, value));
    else if (key == "committee") cfg.committee_size = static_cast<int>(to_long(key, value));
    else if (key == "subsample") cfg.subsample_size = static_cast<int>(to_long(key, value));
    else if (key == "initial_size") cfg.initial_size = static_cast<int>(to_long(key, value));
    else if (key == "cv_k") cfg.cv_k = static_cast<int>(to_long(key, value));
    else if (key == "epochs") cfg.train.epochs = static_cast<int>(to_long(key, value));
    else if (key == "step_size") cfg.train.step_size = to_double(key, value);
    else if (key == "minibatch") cfg.train.minibatch_size = static_cast<int>(to_long(key, value));
    else if (key == "momentum") cfg.train.momentum = to_double(key, value);
    else if (key == "l2_penalty") cfg.train.l2_penalty = to_double(key, value);
    else if (key == "hidden_start") cfg.hidden_start = static_cast<int>(to_long(key, value));
    else if (key == "fixed_hidden_units") cfg.fixed_hidden_units = static_cast<int>(to_long(key, value));
    else if (key == "anchor_includes_batch") cfg.anchor_includes_batch = to_bool(key, value);
    else if (key == "oracle") cfg.oracle = value;
    else if (key == "noise") cfg.noise = to_double(key, value);
    else if (key == "external_dir") cfg.external_dir = value;
    else if (key == "oracle_timeout_s") cfg.oracle_timeout_s = to_double(key, value);
    else if (key == "poll_interval_ms") cfg.poll_interval_ms = to_double(key, value);
    else if (key == "bounds") cfg.bounds = parse_bounds(value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_long(key, value));
    else if (key == "out") cfg.out = value;
    else if (key == "jobs") cfg.jobs = static_cast<int>(to_long(key, value));
    else if (key == "checkpoint") cfg.checkpoint = to_bool(key, value);
    else throw ConfigError("config: unknown key '" + key + "'");
}

EngineConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    EngineConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected key = value, got '" + stripped + "'");
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        try {
            apply_setting(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

OracleKind resolved_oracle_kind(const EngineConfig& cfg) {
    if (cfg.oracle == "synthetic")
        return cfg.dimension == 3 ? OracleKind::Synthetic3d : OracleKind::Synthetic2d;
    return oracle_kind_from_name(cfg.oracle);
}

void finalize_config(EngineConfig& cfg) {
    if (cfg.dimension < 1) throw ConfigError("config dimension: must be >= 1");
    if (cfg.grid_resolution == 0) cfg.grid_resolution = cfg.dimension == 3 ? 41 : 101;
    if (cfg.test_size == 0) cfg.test_size = cfg.dimension == 3 ? 468 : 212;
    if (cfg.batch_size == 0) cfg.batch_size = cfg.dimension == 3 ? 64 : 32;
    if (cfg.rounds < 0) cfg.rounds = cfg.dimension == 3 ? 7 : 6;
    if (cfg.exploratory < 0) cfg.exploratory = cfg.batch_size / 8;
    if (cfg.bounds.empty()) cfg.bounds = unit_bounds(cfg.dimension);
    if (cfg.out.empty()) {
        const char* env = std::getenv("QBAG_OUT");
        cfg.out = env && *env ? env : "./qbag_out";
    }

    const OracleKind kind = resolved_oracle_kind(cfg);
    if (kind == OracleKind::Synthetic2d && cfg.dimension != 2)
        throw ConfigError("config oracle: synthetic2d needs dimension = 2");
    if (kind == OracleKind::Synthetic3d && cfg.dimension != 3)
        throw ConfigError("config oracle: synthetic3d needs dimension = 3");
    if (kind == OracleKind::External && cfg.external_dir.empty())
        throw ConfigError("config external_dir: required for the external oracle");
    if (kind != OracleKind::External && cfg.num_classes != 5)
        throw ConfigError("config classes: the synthetic oracles are 5-class");

    if (cfg.bounds.size() != static_cast<std::size_t>(cfg.dimension))
        throw ConfigError("config bounds: expected " + std::to_string(cfg.dimension) +
                          " axes, got " + std::to_string(cfg.bounds.size()));
    if (cfg.grid_resolution < 2) throw ConfigError("config grid_resolution: must be >= 2");
    if (cfg.rounds < 0) throw ConfigError("config rounds: must be >= 0");
    if (cfg.batch_size < 1) throw ConfigError("config batch_size: must be >= 1");
    if (cfg.exploratory > cfg.batch_size)
        throw ConfigError("config exploratory: cannot exceed batch_size");
    if (cfg.committee_size < 2) throw ConfigError("config committee: must be >= 2");
    if (cfg.initial_size < 1) throw ConfigError("config initial_size: must be >= 1");
    if (cfg.cv_k < 2) throw ConfigError("config cv_k: must be >= 2");
    if (cfg.train.epochs < 1) throw ConfigError("config epochs: must be >= 1");
    if (cfg.train.step_size <= 0.0) throw ConfigError("config step_size: must be > 0");
    if (cfg.train.minibatch_size < 1) throw ConfigError("config minibatch: must be >= 1");
    if (cfg.train.momentum < 0.0 || cfg.train.momentum >= 1.0)
        throw ConfigError("config momentum: must be in [0, 1)");
    if (cfg.train.l2_penalty < 0.0) throw ConfigError("config l2_penalty: must be >= 0");
    if (cfg.noise < 0.0 || cfg.noise >= 1.0)
        throw ConfigError("config noise: must be in [0, 1)");
    if (cfg.hidden_start < 2) throw ConfigError("config hidden_start: must be >= 2");
    if (cfg.test_size < 1) throw ConfigError("config test_size: must be >= 1");
    if (cfg.num_classes < 2) throw ConfigError("config classes: must be >= 2");
    if (cfg.oracle_timeout_s <= 0.0) throw ConfigError("config oracle_timeout_s: must be > 0");
    if (cfg.poll_interval_ms <= 0.0) throw ConfigError("config poll_interval_ms: must be > 0");

    std::int64_t points = 1;
    for (int d = 0; d < cfg.dimension; ++d) {
        points *= cfg.grid_resolution;
        if (points > kDefaultPoolCap)
            throw ConfigError("config grid_resolution: pool would exceed the size cap");
    }
    const std::int64_t available = points - cfg.test_size - cfg.initial_size;
    if (available < 0)
        throw ConfigError("config: test_size + initial_size exceeds the pool");
}

std::string canonical_config(const EngineConfig& cfg) {
    std::ostringstream out;
    out << "anchor_includes_batch=" << (cfg.anchor_includes_batch ? 1 : 0) << "\n";
    out << "batch_size=" << cfg.batch_size << "\n";
    out << "bounds=";
    for (std::size_t i = 0; i < cfg.bounds.size(); ++i) {
        if (i) out << ';';
        out << csv::format_double(cfg.bounds[i].lo) << ':' << csv::format_double(cfg.bounds[i].hi);
    }
    out << "\n";
    out << "classes=" << cfg.num_classes << "\n";
    out << "committee=" << cfg.committee_size << "\n";
    out << "cv_k=" << cfg.cv_k << "\n";
    out << "dimension=" << cfg.dimension << "\n";
    out << "epochs=" << cfg.train.epochs << "\n";
    out << "exploratory=" << cfg.exploratory << "\n";
    out << "external_dir=" << cfg.external_dir << "\n";
    out << "fixed_hidden_units=" << cfg.fixed_hidden_units << "\n";
    out << "grid_resolution=" << cfg.grid_resolution << "\n";
    out << "hidden_start=" << cfg.hidden_start << "\n";
    out << "initial_size=" << cfg.initial_size << "\n";
    out << "l2_penalty=" << csv::format_double(cfg.train.l2_penalty) << "\n";
    out << "minibatch=" << cfg.train.minibatch_size << "\n";
    out << "momentum=" << csv::format_double(cfg.train.momentum) << "\n";
    out << "noise=" << csv::format_double(cfg.noise) << "\n";
    out << "oracle=" << oracle_kind_name(resolved_oracle_kind(cfg)) << "\n";
    out << "rounds=" << cfg.rounds << "\n";
    out << "seed=" << cfg.seed << "\n";
    out << "seeds=";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        if (i) out << ',';
        out << cfg.seeds[i];
    }
    out << "\n";
    out << "step_size=" << csv::format_double(cfg.train.step_size) << "\n";
    out << "strategies=";
    for (std::size_t i = 0; i < cfg.strategies.size(); ++i) {
        if (i) out << ',';
        out << strategy_name(cfg.strategies[i]);
    }
    out << "\n";
    out << "subsample=" << cfg.subsample_size << "\n";
    out << "test_size=" << cfg.test_size << "\n";
    return out.str();
}

std::string config_digest(const EngineConfig& cfg) {
    const std::string canon = canonical_config(cfg);
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : canon) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ComparisonConfig to_comparison_config(const EngineConfig& cfg) {
    ComparisonConfig cc;
    cc.base.rounds = cfg.rounds;
    cc.base.batch_size = cfg.batch_size;
    cc.base.exploratory = cfg.exploratory;
    cc.base.committee_size = cfg.committee_size;
    cc.base.subsample_size = cfg.subsample_size;
    cc.base.initial_size = cfg.initial_size;
    cc.base.train = cfg.train;
    cc.base.cv_k = cfg.cv_k;
    cc.base.num_classes = cfg.num_classes;
    cc.base.hidden_start = cfg.hidden_start;
    cc.base.fixed_hidden_units = cfg.fixed_hidden_units;
    cc.base.anchor_includes_batch = cfg.anchor_includes_batch;
    cc.strategies = cfg.strategies;
    cc.seeds = cfg.seeds;
    cc.oracle.kind = resolved_oracle_kind(cfg);
    cc.oracle.noise_rate = cfg.noise;
    cc.oracle.external_dir = cfg.external_dir;
    cc.oracle.bounds = cfg.bounds;
    cc.oracle.timeout_s = cfg.oracle_timeout_s;
    cc.oracle.poll_interval_s = cfg.poll_interval_ms / 1000.0;
    cc.oracle.num_classes = cfg.num_classes;
    cc.dimension = cfg.dimension;
    cc.grid_resolution = cfg.grid_resolution;
    cc.test_size = cfg.test_size;
    cc.master_seed = cfg.seed;
    cc.digest = config_digest(cfg);
    return cc;
}

}  // namespace qbag
