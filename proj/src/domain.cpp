#include "qbag/domain.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "qbag/csv.hpp"
#include "qbag/errors.hpp"

namespace qbag {

bool operator==(const FeatureVector& a, const FeatureVector& b) {
    return a.coords == b.coords;
}

bool lex_less(const FeatureVector& a, const FeatureVector& b) {
    return std::lexicographical_compare(a.coords.begin(), a.coords.end(), b.coords.begin(),
                                        b.coords.end());
}

double squared_distance(const FeatureVector& a, const FeatureVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.coords.size(); ++i) {
        double d = a.coords[i] - b.coords[i];
        s += d * d;
    }
    return s;
}

std::string_view provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Initial: return "initial";
        case Provenance::DisagreementQuery: return "disagreement-query";
        case Provenance::ExploratoryQuery: return "exploratory-query";
        case Provenance::RandomQuery: return "random-query";
    }
    return "initial";
}

Provenance provenance_from_name(std::string_view name) {
    if (name == "initial") return Provenance::Initial;
    if (name == "disagreement-query") return Provenance::DisagreementQuery;
    if (name == "exploratory-query") return Provenance::ExploratoryQuery;
    if (name == "random-query") return Provenance::RandomQuery;
    throw LoadError("unknown provenance: '" + std::string(name) + "'");
}

int VoteTally::max_count() const {
    int m = 0;
    for (int c : counts) m = std::max(m, c);
    return m;
}

bool tally_in_disagreement(const VoteTally& t) {
    return 2 * t.max_count() <= t.n_c;
}

int vote_winner(const PointVote& v) {
    const auto& counts = v.tally.counts;
    int best = 0;
    for (std::size_t y = 1; y < counts.size(); ++y) {
        if (counts[y] > counts[best]) {
            best = static_cast<int>(y);
        } else if (counts[y] == counts[best] &&
                   v.prob_sum[y] > v.prob_sum[static_cast<std::size_t>(best)]) {
            best = static_cast<int>(y);
        }
    }
    return best;
}

Bounds unit_bounds(int dimension) {
    return Bounds(static_cast<std::size_t>(dimension), AxisBounds{0.0, 1.0});
}

std::vector<FeatureVector> normalize_features(const std::vector<std::vector<double>>& raw,
                                              const Bounds& bounds) {
    for (std::size_t d = 0; d < bounds.size(); ++d) {
        if (!std::isfinite(bounds[d].lo) || !std::isfinite(bounds[d].hi) ||
            bounds[d].lo >= bounds[d].hi)
            throw ConfigError("bounds for dimension " + std::to_string(d) +
                              ": min must be finite and less than max");
    }

    std::vector<FeatureVector> out;
    out.reserve(raw.size());
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < raw.size(); ++r) {
        const auto& row = raw[r];
        if (row.size() != bounds.size())
            throw DomainError("row " + std::to_string(r) + " has dimension " +
                              std::to_string(row.size()) + ", expected " +
                              std::to_string(bounds.size()));
        std::string key(reinterpret_cast<const char*>(row.data()),
                        row.size() * sizeof(double));
        if (!seen.insert(key).second)
            throw DomainError("duplicate raw point at row " + std::to_string(r));

        FeatureVector v;
        v.coords.resize(row.size());
        for (std::size_t d = 0; d < row.size(); ++d) {
            if (!std::isfinite(row[d]) || row[d] < bounds[d].lo || row[d] > bounds[d].hi)
                throw RangeError("value " + csv::format_double(row[d]) + " in dimension " +
                                 std::to_string(d) + " outside [" +
                                 csv::format_double(bounds[d].lo) + ", " +
                                 csv::format_double(bounds[d].hi) + "] (row " +
                                 std::to_string(r) + ")");
            v.coords[d] = (row[d] - bounds[d].lo) / (bounds[d].hi - bounds[d].lo);
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<double> denormalize(const FeatureVector& v, const Bounds& bounds) {
    if (static_cast<std::size_t>(v.dim()) != bounds.size())
        throw DomainError("dimension mismatch in denormalize");
    std::vector<double> raw(bounds.size());
    for (std::size_t d = 0; d < bounds.size(); ++d)
        raw[d] = bounds[d].lo + v.coords[d] * (bounds[d].hi - bounds[d].lo);
    return raw;
}

Pool build_grid_pool(int dimension, int resolution, std::int64_t cap) {
    if (dimension < 1) throw ConfigError("grid dimension must be >= 1");
    if (resolution < 2) throw ConfigError("grid resolution must be >= 2");

    std::int64_t total = 1;
    for (int d = 0; d < dimension; ++d) {
        if (total > cap / resolution)
            throw SizeError("grid of " + std::to_string(resolution) + "^" +
                            std::to_string(dimension) + " points exceeds the cap of " +
                            std::to_string(cap));
        total *= resolution;
    }

    Pool pool;
    pool.dimension = dimension;
    pool.unlabeled.reserve(static_cast<std::size_t>(total));
    std::vector<int> idx(static_cast<std::size_t>(dimension), 0);
    for (std::int64_t id = 0; id < total; ++id) {
        FeatureVector v;
        v.coords.resize(static_cast<std::size_t>(dimension));
        for (int d = 0; d < dimension; ++d)
            v.coords[static_cast<std::size_t>(d)] =
                static_cast<double>(idx[static_cast<std::size_t>(d)]) / (resolution - 1);
        pool.unlabeled.push_back(UnlabeledPoint{id, std::move(v)});
        // Mixed-radix increment, last axis fastest: ids follow lexicographic
        // coordinate order.
        for (int d = dimension - 1; d >= 0; --d) {
            if (++idx[static_cast<std::size_t>(d)] < resolution) break;
            idx[static_cast<std::size_t>(d)] = 0;
        }
    }
    return pool;
}

VoteTally tally_votes(const std::vector<int>& predictions, int num_classes) {
    if (predictions.empty()) throw DomainError("tally_votes: empty prediction list");
    VoteTally t;
    t.counts.assign(static_cast<std::size_t>(num_classes), 0);
    t.n_c = static_cast<int>(predictions.size());
    for (int y : predictions) {
        if (y < 0 || y >= num_classes)
            throw DomainError("tally_votes: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(num_classes) + ")");
        ++t.counts[static_cast<std::size_t>(y)];
    }
    return t;
}

namespace {

std::string coord_key(const FeatureVector& v) {
    return std::string(reinterpret_cast<const char*>(v.coords.data()),
                       v.coords.size() * sizeof(double));
}

}  // namespace

void validate_pool(const Pool& pool) {
    std::unordered_set<std::string> seen;
    auto check = [&](const FeatureVector& v, long id) {
        if (v.dim() != pool.dimension)
            throw DomainError("pool point " + std::to_string(id) + " has dimension " +
                              std::to_string(v.dim()) + ", expected " +
                              std::to_string(pool.dimension));
        if (!seen.insert(coord_key(v)).second)
            throw DomainError("pool contains duplicate point (id " + std::to_string(id) + ")");
    };
    for (const auto& li : pool.labeled) check(li.features, li.id);
    for (const auto& up : pool.unlabeled) check(up.features, up.id);
}

void move_to_labeled(Pool& pool, const std::vector<int>& unlabeled_indices,
                     const std::vector<int>& labels, Provenance provenance, int round) {
    if (unlabeled_indices.size() != labels.size())
        throw DomainError("move_to_labeled: index/label count mismatch");

    std::vector<char> taken(pool.unlabeled.size(), 0);
    for (std::size_t j = 0; j < unlabeled_indices.size(); ++j) {
        int i = unlabeled_indices[j];
        if (i < 0 || static_cast<std::size_t>(i) >= pool.unlabeled.size() || taken[i])
            throw DomainError("move_to_labeled: bad or repeated unlabeled index " +
                              std::to_string(i));
        taken[i] = 1;
        auto& up = pool.unlabeled[static_cast<std::size_t>(i)];
        pool.labeled.push_back(
            LabeledInstance{up.id, up.features, labels[j], provenance, round});
    }

    std::vector<UnlabeledPoint> rest;
    rest.reserve(pool.unlabeled.size() - unlabeled_indices.size());
    for (std::size_t i = 0; i < pool.unlabeled.size(); ++i)
        if (!taken[i]) rest.push_back(std::move(pool.unlabeled[i]));
    pool.unlabeled = std::move(rest);
}

void write_pool_csv(std::ostream& out, const Pool& pool, std::string_view comment) {
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "id";
    for (int d = 1; d <= pool.dimension; ++d) out << ",x" << d;
    out << ",label,provenance,round\n";
    for (const auto& li : pool.labeled) {
        out << li.id;
        for (double c : li.features.coords) out << ',' << csv::format_double(c);
        out << ',' << li.label << ',' << provenance_name(li.provenance) << ',' << li.round
            << "\n";
    }
    for (const auto& up : pool.unlabeled) {
        out << up.id;
        for (double c : up.features.coords) out << ',' << csv::format_double(c);
        out << ",,,\n";
    }
}

Pool read_pool_csv(std::istream& in) {
    std::string line;
    // Skip comment lines before the header.
    do {
        if (!std::getline(in, line)) throw LoadError("pool snapshot: missing header");
        if (!line.empty() && line.back() == '\r') line.pop_back();
    } while (!line.empty() && line[0] == '#');

    auto header = csv::split_line(line);
    if (header.size() < 5 || header[0] != "id")
        throw LoadError("pool snapshot: unexpected header '" + line + "'");
    int dimension = static_cast<int>(header.size()) - 4;

    Pool pool;
    pool.dimension = dimension;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = csv::split_line(line);
        if (fields.size() != header.size())
            throw LoadError("pool snapshot row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        long id = csv::parse_long(fields[0], "pool id");
        FeatureVector v;
        v.coords.resize(static_cast<std::size_t>(dimension));
        for (int d = 0; d < dimension; ++d)
            v.coords[static_cast<std::size_t>(d)] =
                csv::parse_double(fields[static_cast<std::size_t>(1 + d)], "pool coordinate");
        const std::string& label = fields[static_cast<std::size_t>(1 + dimension)];
        if (label.empty()) {
            pool.unlabeled.push_back(UnlabeledPoint{id, std::move(v)});
        } else {
            LabeledInstance li;
            li.id = id;
            li.features = std::move(v);
            li.label = static_cast<int>(csv::parse_long(label, "pool label"));
            li.provenance =
                provenance_from_name(fields[static_cast<std::size_t>(2 + dimension)]);
            li.round = static_cast<int>(
                csv::parse_long(fields[static_cast<std::size_t>(3 + dimension)], "pool round"));
            pool.labeled.push_back(std::move(li));
        }
    }
    return pool;
}

}  // namespace qbag
