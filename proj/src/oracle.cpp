#include "qbag/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "qbag/csv.hpp"
#include "qbag/errors.hpp"
#include "qbag/rng.hpp"

namespace fs = std::filesystem;

namespace qbag {

OracleKind oracle_kind_from_name(std::string_view name) {
    if (name == "synthetic2d") return OracleKind::Synthetic2d;
    if (name == "synthetic3d") return OracleKind::Synthetic3d;
    if (name == "external") return OracleKind::External;
    throw ConfigError("unknown oracle kind: '" + std::string(name) + "'");
}

std::string_view oracle_kind_name(OracleKind k) {
    switch (k) {
        case OracleKind::Synthetic2d: return "synthetic2d";
        case OracleKind::Synthetic3d: return "synthetic3d";
        case OracleKind::External: return "external";
    }
    return "synthetic2d";
}

namespace {

void check_unit_range(const FeatureVector& x, int expected_dim) {
    if (x.dim() != expected_dim)
        throw DomainError("oracle: expected dimension " + std::to_string(expected_dim) +
                          ", got " + std::to_string(x.dim()));
    for (int d = 0; d < expected_dim; ++d)
        if (!(x[d] >= 0.0 && x[d] <= 1.0))
            throw DomainError("oracle: coordinate " + std::to_string(d) + " = " +
                              csv::format_double(x[d]) + " outside [0,1]");
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

int band_of(double s) {
    double c = std::clamp(s, 0.0, 0.9999);
    return static_cast<int>(std::floor(5.0 * c));
}

}  // namespace

int synthetic2d_label(const FeatureVector& x) {
    check_unit_range(x, 2);
    const double s = 0.55 * x[1] + 0.45 * (1.0 - x[0]) +
                     0.12 * std::sin(2.0 * std::numbers::pi * x[0]) *
                         std::cos(std::numbers::pi * x[1]);
    return band_of(s);
}

int synthetic3d_label(const FeatureVector& x) {
    check_unit_range(x, 3);
    FeatureVector slice;
    slice.coords = {x[0], clamp01(x[1] + 0.2 * (x[2] - 0.5))};
    return synthetic2d_label(slice);
}

SyntheticOracle::SyntheticOracle(OracleKind kind) : kind_(kind) {
    if (kind != OracleKind::Synthetic2d && kind != OracleKind::Synthetic3d)
        throw ConfigError("SyntheticOracle: kind must be synthetic2d or synthetic3d");
}

std::vector<int> SyntheticOracle::label_batch(const std::vector<FeatureVector>& batch,
                                              int /*round*/) {
    std::vector<int> labels;
    labels.reserve(batch.size());
    for (const auto& x : batch)
        labels.push_back(kind_ == OracleKind::Synthetic2d ? synthetic2d_label(x)
                                                          : synthetic3d_label(x));
    return labels;
}

NoisyOracle::NoisyOracle(std::unique_ptr<Oracle> base, double flip_rate, std::uint64_t seed)
    : base_(std::move(base)), flip_rate_(flip_rate), seed_(seed) {
    if (flip_rate_ < 0.0 || flip_rate_ >= 1.0)
        throw ConfigError("NoisyOracle: flip rate must be in [0, 1)");
}

std::vector<int> NoisyOracle::label_batch(const std::vector<FeatureVector>& batch, int round) {
    auto labels = base_->label_batch(batch, round);
    const int k = num_classes();
    for (auto& y : labels) {
        Rng rng(derive_seed(seed_, "flip", sequence_++));
        if (flip_rate_ > 0.0 && rng.uniform01() < flip_rate_) {
            // Uniform over the k-1 classes other than the true one.
            int offset = 1 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(k - 1)));
            y = (y + offset) % k;
        }
    }
    return labels;
}

ExternalOracle::ExternalOracle(std::string dir, Bounds bounds, int num_classes,
                               double timeout_s, double poll_interval_s)
    : dir_(std::move(dir)),
      bounds_(std::move(bounds)),
      num_classes_(num_classes),
      timeout_s_(timeout_s),
      poll_interval_s_(poll_interval_s) {
    if (dir_.empty()) throw ConfigError("external oracle: directory must be set");
}

namespace {

struct LabelFileResult {
    bool complete = false;
    std::vector<std::pair<long, int>> received;
};

// Parses labels_<round>.csv. Returns complete only when every queried id has
// a label. A malformed final row is treated as a write in progress; anything
// else malformed is a protocol error.
LabelFileResult parse_label_file(const fs::path& path, std::size_t expected, int num_classes) {
    LabelFileResult result;
    std::ifstream in(path);
    if (!in) return result;
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) return result;  // header not written yet

    std::vector<std::pair<long, int>> rows;
    std::vector<char> seen(expected, 0);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto fields = csv::split_line(lines[i]);
        long id = -1;
        int label = -1;
        bool ok = fields.size() == 2;
        if (ok) {
            try {
                id = csv::parse_long(fields[0], "label id");
                label = static_cast<int>(csv::parse_long(fields[1], "label value"));
            } catch (const LoadError&) {
                ok = false;
            }
        }
        if (!ok) {
            if (i + 1 == lines.size()) return result;  // torn final row; poll again
            throw ProtocolError("label file " + path.string() + ": malformed row " +
                                std::to_string(i + 1) + " ('" + lines[i] + "')");
        }
        if (id < 0 || static_cast<std::size_t>(id) >= expected)
            throw ProtocolError("label file " + path.string() + ": unknown id " +
                                std::to_string(id) + " at row " + std::to_string(i + 1));
        if (seen[static_cast<std::size_t>(id)])
            throw ProtocolError("label file " + path.string() + ": duplicate id " +
                                std::to_string(id) + " at row " + std::to_string(i + 1));
        if (label < 0 || label >= num_classes)
            throw ProtocolError("label file " + path.string() + ": label " +
                                std::to_string(label) + " outside [0, " +
                                std::to_string(num_classes) + ") at row " +
                                std::to_string(i + 1));
        seen[static_cast<std::size_t>(id)] = 1;
        rows.emplace_back(id, label);
    }
    result.received = std::move(rows);
    result.complete = result.received.size() == expected;
    return result;
}

}  // namespace

std::vector<int> ExternalOracle::label_batch(const std::vector<FeatureVector>& batch,
                                             int round) {
    if (batch.empty()) throw DomainError("external oracle: empty batch");
    const int d = batch.front().dim();
    if (bounds_.size() != static_cast<std::size_t>(d))
        throw ConfigError("external oracle: bounds dimension " +
                          std::to_string(bounds_.size()) + " does not match batch dimension " +
                          std::to_string(d));

    fs::create_directories(dir_);
    const fs::path query_path = fs::path(dir_) / ("queries_" + std::to_string(round) + ".csv");
    const fs::path label_path = fs::path(dir_) / ("labels_" + std::to_string(round) + ".csv");

    // Write-then-rename so the responder never sees a half-written file.
    {
        const fs::path tmp = query_path.string() + ".tmp";
        std::ofstream out(tmp);
        if (!out) throw ProtocolError("external oracle: cannot write " + tmp.string());
        out << "id";
        for (int i = 1; i <= d; ++i) out << ",x" << i;
        out << "\n";
        for (std::size_t i = 0; i < batch.size(); ++i) {
            auto raw = denormalize(batch[i], bounds_);
            out << i;
            for (double v : raw) out << ',' << csv::format_double(v);
            out << "\n";
        }
        out.close();
        fs::rename(tmp, query_path);
    }

    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(timeout_s_));
    LabelFileResult last;
    while (true) {
        last = parse_label_file(label_path, batch.size(), num_classes_);
        if (last.complete) break;
        if (std::chrono::steady_clock::now() >= deadline) {
            std::vector<char> have(batch.size(), 0);
            for (const auto& [id, label] : last.received)
                have[static_cast<std::size_t>(id)] = 1;
            std::vector<long> missing;
            for (std::size_t i = 0; i < batch.size(); ++i)
                if (!have[i]) missing.push_back(static_cast<long>(i));
            throw PendingOracle("external oracle timed out after " +
                                    csv::format_double(timeout_s_) + "s waiting for " +
                                    label_path.string() + " (" +
                                    std::to_string(last.received.size()) + "/" +
                                    std::to_string(batch.size()) + " labels arrived)",
                                std::move(last.received), std::move(missing));
        }
        std::this_thread::sleep_for(std::chrono::duration<double>(poll_interval_s_));
    }

    std::vector<int> labels(batch.size());
    for (const auto& [id, label] : last.received) labels[static_cast<std::size_t>(id)] = label;
    return labels;
}

std::unique_ptr<Oracle> make_oracle(const OracleSpec& spec) {
    std::unique_ptr<Oracle> base;
    if (spec.kind == OracleKind::External) {
        Bounds b = spec.bounds;
        if (b.empty())
            throw ConfigError("external oracle: bounds must be configured");
        base = std::make_unique<ExternalOracle>(spec.external_dir, std::move(b),
                                                spec.num_classes, spec.timeout_s,
                                                spec.poll_interval_s);
    } else {
        base = std::make_unique<SyntheticOracle>(spec.kind);
    }
    if (spec.noise_rate > 0.0)
        return std::make_unique<NoisyOracle>(std::move(base), spec.noise_rate, spec.noise_seed);
    return base;
}

}  // namespace qbag
