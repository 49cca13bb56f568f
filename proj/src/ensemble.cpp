#include "qbag/ensemble.hpp"

#include <istream>
#include <ostream>
#include <string>

#include "qbag/errors.hpp"
#include "qbag/kernels.hpp"
#include "qbag/rng.hpp"

namespace qbag {

std::vector<std::vector<LabeledInstance>> bootstrap_subsamples(
    const std::vector<LabeledInstance>& labeled, int n_c, int m_c, std::uint64_t seed) {
    if (labeled.empty()) throw DomainError("bootstrap_subsamples: empty labeled pool");
    if (n_c < 2) throw ConfigError("bootstrap_subsamples: n_c must be >= 2");
    if (m_c < 1) throw ConfigError("bootstrap_subsamples: m_c must be >= 1");

    Rng rng(seed);
    std::vector<std::vector<LabeledInstance>> subsamples(static_cast<std::size_t>(n_c));
    for (auto& sub : subsamples) {
        sub.reserve(static_cast<std::size_t>(m_c));
        for (int j = 0; j < m_c; ++j)
            sub.push_back(labeled[static_cast<std::size_t>(
                rng.uniform_below(labeled.size()))]);
    }
    return subsamples;
}

Committee train_committee_on(const std::vector<std::vector<LabeledInstance>>& subsamples,
                             int hidden_units, int num_classes, const TrainConfig& cfg,
                             const std::vector<std::uint64_t>& member_seeds) {
    if (subsamples.size() != member_seeds.size())
        throw ConfigError("train_committee_on: subsample/seed count mismatch");
    const int n_c = static_cast<int>(subsamples.size());

    Committee c;
    c.n_c = n_c;
    c.m_c = subsamples.empty() ? 0 : static_cast<int>(subsamples.front().size());
    c.num_classes = num_classes;
    c.member_seeds = member_seeds;
    c.members.resize(static_cast<std::size_t>(n_c));

    std::vector<std::string> failures(static_cast<std::size_t>(n_c));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int t = 0; t < n_c; ++t) {
        try {
            TrainConfig member_cfg = cfg;
            member_cfg.rng_seed = member_seeds[static_cast<std::size_t>(t)];
            c.members[static_cast<std::size_t>(t)] =
                train(subsamples[static_cast<std::size_t>(t)], hidden_units, num_classes,
                      member_cfg);
        } catch (const std::exception& e) {
            failures[static_cast<std::size_t>(t)] = e.what();
        }
    }
    for (int t = 0; t < n_c; ++t)
        if (!failures[static_cast<std::size_t>(t)].empty())
            throw TrainingDivergence("committee member " + std::to_string(t) + ": " +
                                     failures[static_cast<std::size_t>(t)]);
    return c;
}

Committee train_committee(const std::vector<LabeledInstance>& labeled, int hidden_units,
                          int n_c, int m_c, int num_classes, const TrainConfig& cfg) {
    if (m_c <= 0) m_c = static_cast<int>(labeled.size());
    auto subsamples =
        bootstrap_subsamples(labeled, n_c, m_c, derive_seed(cfg.rng_seed, "bootstrap"));
    std::vector<std::uint64_t> member_seeds(static_cast<std::size_t>(n_c));
    for (int t = 0; t < n_c; ++t)
        member_seeds[static_cast<std::size_t>(t)] = cfg.rng_seed + static_cast<std::uint64_t>(t);
    return train_committee_on(subsamples, hidden_units, num_classes, cfg, member_seeds);
}

PointVote committee_vote(const Committee& c, const FeatureVector& x) {
    if (x.dim() != c.input_dim())
        throw DomainError("committee_vote: input dimension " + std::to_string(x.dim()) +
                          " does not match committee dimension " +
                          std::to_string(c.input_dim()));
    PointVote v;
    kernels::vote_point(c.members, x, v);
    return v;
}

int committee_predict(const Committee& c, const FeatureVector& x) {
    return vote_winner(committee_vote(c, x));
}

bool in_disagreement_region(const Committee& c, const FeatureVector& x) {
    return tally_in_disagreement(committee_vote(c, x).tally);
}

std::vector<PointVote> committee_votes_over(const Committee& c,
                                            const std::vector<UnlabeledPoint>& points) {
    std::vector<const FeatureVector*> ptrs;
    ptrs.reserve(points.size());
    for (const auto& p : points) ptrs.push_back(&p.features);
    return kernels::committee_votes(c.members, ptrs);
}

std::vector<int> disagreement_indices(const std::vector<PointVote>& votes) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < votes.size(); ++i)
        if (tally_in_disagreement(votes[i].tally)) idx.push_back(static_cast<int>(i));
    return idx;
}

std::vector<int> region_indices_with_threshold(const std::vector<PointVote>& votes,
                                               int threshold) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < votes.size(); ++i)
        if (votes[i].tally.max_count() <= threshold) idx.push_back(static_cast<int>(i));
    return idx;
}

std::vector<FeatureVector> disagreement_region(const Committee& c,
                                               const std::vector<UnlabeledPoint>& points) {
    auto votes = committee_votes_over(c, points);
    std::vector<FeatureVector> region;
    for (int i : disagreement_indices(votes))
        region.push_back(points[static_cast<std::size_t>(i)].features);
    return region;
}

std::vector<LabeledInstance> flag_suspect_labels(const Committee& c,
                                                 const std::vector<LabeledInstance>& labeled) {
    std::vector<LabeledInstance> suspects;
    for (const auto& inst : labeled)
        if (committee_predict(c, inst.features) != inst.label) suspects.push_back(inst);
    return suspects;
}

void save_committee(std::ostream& out, const Committee& c) {
    out << "committee," << c.n_c << ',' << c.m_c << ',' << c.num_classes << "\n";
    for (std::uint64_t s : c.member_seeds) out << s << "\n";
    for (const auto& m : c.members) save_model(out, m);
}

Committee load_committee(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw LoadError("committee file: missing header");
    Committee c;
    if (std::sscanf(header.c_str(), "committee,%d,%d,%d", &c.n_c, &c.m_c, &c.num_classes) != 3)
        throw LoadError("committee file: bad header '" + header + "'");
    if (c.n_c < 2) throw LoadError("committee file: implausible member count");
    c.member_seeds.resize(static_cast<std::size_t>(c.n_c));
    for (auto& s : c.member_seeds) {
        std::string line;
        if (!std::getline(in, line)) throw LoadError("committee file: truncated seed list");
        s = static_cast<std::uint64_t>(std::stoull(line));
    }
    c.members.reserve(static_cast<std::size_t>(c.n_c));
    for (int t = 0; t < c.n_c; ++t) c.members.push_back(load_model(in));
    return c;
}

}  // namespace qbag
