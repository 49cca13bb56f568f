// Times the serial reference kernels against the OpenMP ones on synthetic
// workloads and checks that both produce identical results.

#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qbag/ensemble.hpp"
#include "qbag/kernels.hpp"
#include "qbag/rng.hpp"

using namespace qbag;

namespace {

double now() {
#ifdef _OPENMP
    return omp_get_wtime();
#else
    return static_cast<double>(clock()) / CLOCKS_PER_SEC;
#endif
}

std::vector<FeatureVector> random_points(int n, int d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<FeatureVector> pts(static_cast<std::size_t>(n));
    for (auto& p : pts) {
        p.coords.resize(static_cast<std::size_t>(d));
        for (double& c : p.coords) c = rng.uniform01();
    }
    return pts;
}

std::vector<MlpModel> random_members(int n_c, int d, int h, int k, std::uint64_t seed) {
    std::vector<MlpModel> members;
    for (int t = 0; t < n_c; ++t) members.push_back(make_random_model(d, h, k, seed + static_cast<std::uint64_t>(t)));
    return members;
}

struct Row {
    const char* name;
    double serial_s;
    double parallel_s;
    bool equal;
};

void print_row(const Row& r) {
    std::printf("%-22s %10.3f ms %10.3f ms %8.2fx   %s\n", r.name, r.serial_s * 1e3,
                r.parallel_s * 1e3, r.serial_s / r.parallel_s,
                r.equal ? "outputs equal" : "OUTPUTS DIFFER");
}

bool votes_equal(const std::vector<PointVote>& a, const std::vector<PointVote>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].tally.counts != b[i].tally.counts || a[i].prob_sum != b[i].prob_sum)
            return false;
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    int n_points = 50000;
    if (argc > 1) n_points = std::atoi(argv[1]);

    const int d = 3, h = 32, k = 5, n_c = 20;
    auto points = random_points(n_points, d, 7);
    auto members = random_members(n_c, d, h, k, 11);
    std::vector<const FeatureVector*> ptrs;
    for (const auto& p : points) ptrs.push_back(&p);

    std::printf("kernel benchmark: %d points, %d members (d=%d, hidden=%d, classes=%d), %d thread(s)\n\n",
                n_points, n_c, d, h, k, kernels::jobs());
    std::printf("%-22s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    {
        std::vector<PointVote> a(points.size()), b(points.size());
        double t0 = now();
        kernels::committee_votes_serial(members, ptrs, a.data());
        double t1 = now();
        kernels::committee_votes_parallel(members, ptrs, b.data());
        double t2 = now();
        print_row({"committee_votes", t1 - t0, t2 - t1, votes_equal(a, b)});
    }
    {
        FeatureVector anchor(std::vector<double>{0.5, 0.5, 0.5});
        std::vector<double> a(points.size(), 1e30), b(points.size(), 1e30);
        double t0 = now();
        for (int rep = 0; rep < 50; ++rep)
            kernels::min_sqdist_update_serial(ptrs, anchor, a.data());
        double t1 = now();
        for (int rep = 0; rep < 50; ++rep)
            kernels::min_sqdist_update_parallel(ptrs, anchor, b.data());
        double t2 = now();
        print_row({"min_sqdist_update x50", t1 - t0, t2 - t1, a == b});
    }
    {
        std::vector<LabeledInstance> data;
        data.reserve(points.size());
        for (std::size_t i = 0; i < points.size(); ++i)
            data.push_back(LabeledInstance{static_cast<long>(i), points[i],
                                           static_cast<int>(i % k), Provenance::Initial, 0});
        double t0 = now();
        long a = kernels::count_vote_correct_serial(members, data);
        double t1 = now();
        long b = kernels::count_vote_correct_parallel(members, data);
        double t2 = now();
        print_row({"count_vote_correct", t1 - t0, t2 - t1, a == b});
    }
    return 0;
}
