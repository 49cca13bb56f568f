#include "qbag/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qbag/csv.hpp"
#include "qbag/errors.hpp"
#include "qbag/rng.hpp"

namespace qbag {

namespace {

void softmax_inplace(double* z, int k) {
    double m = z[0];
    for (int i = 1; i < k; ++i) m = std::max(m, z[i]);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        z[i] = std::exp(z[i] - m);
        sum += z[i];
    }
    for (int i = 0; i < k; ++i) z[i] /= sum;
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

bool model_finite(const MlpModel& m) {
    return all_finite(m.w1) && all_finite(m.b1) && all_finite(m.w2) && all_finite(m.b2);
}

struct Scratch {
    std::vector<double> z1, a1, p, d1;
};

// One SGD pass with a fixed step size. Returns false if parameters went
// non-finite.
bool run_descent(MlpModel& m, const std::vector<LabeledInstance>& data,
                 const TrainConfig& cfg, double step, Rng& rng) {
    const int n = static_cast<int>(data.size());
    const int d = m.input_dim;
    const int h = m.hidden_units;
    const int k = m.output_dim;
    const int batch = std::min(std::max(1, cfg.minibatch_size), n);

    Scratch s;
    s.z1.resize(static_cast<std::size_t>(h));
    s.a1.resize(static_cast<std::size_t>(h));
    s.p.resize(static_cast<std::size_t>(k));
    s.d1.resize(static_cast<std::size_t>(h));

    Gradients g;
    g.w1.assign(m.w1.size(), 0.0);
    g.b1.assign(m.b1.size(), 0.0);
    g.w2.assign(m.w2.size(), 0.0);
    g.b2.assign(m.b2.size(), 0.0);

    Gradients vel;
    vel.w1.assign(m.w1.size(), 0.0);
    vel.b1.assign(m.b1.size(), 0.0);
    vel.w2.assign(m.w2.size(), 0.0);
    vel.b2.assign(m.b2.size(), 0.0);
    const double beta = cfg.momentum;

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (int start = 0; start < n; start += batch) {
            const int end = std::min(start + batch, n);
            const int bs = end - start;
            std::fill(g.w1.begin(), g.w1.end(), 0.0);
            std::fill(g.b1.begin(), g.b1.end(), 0.0);
            std::fill(g.w2.begin(), g.w2.end(), 0.0);
            std::fill(g.b2.begin(), g.b2.end(), 0.0);

            for (int bi = start; bi < end; ++bi) {
                const auto& inst = data[static_cast<std::size_t>(order[static_cast<std::size_t>(bi)])];
                const double* x = inst.features.coords.data();

                for (int j = 0; j < h; ++j) {
                    const double* wrow = m.w1.data() + static_cast<std::size_t>(j) * d;
                    double z = m.b1[static_cast<std::size_t>(j)];
                    for (int i = 0; i < d; ++i) z += wrow[i] * x[i];
                    s.z1[static_cast<std::size_t>(j)] = z;
                    s.a1[static_cast<std::size_t>(j)] = z > 0.0 ? z : 0.0;
                }
                for (int c = 0; c < k; ++c) {
                    const double* wrow = m.w2.data() + static_cast<std::size_t>(c) * h;
                    double z = m.b2[static_cast<std::size_t>(c)];
                    for (int j = 0; j < h; ++j) z += wrow[j] * s.a1[static_cast<std::size_t>(j)];
                    s.p[static_cast<std::size_t>(c)] = z;
                }
                softmax_inplace(s.p.data(), k);

                // delta2 = p - onehot(y)
                s.p[static_cast<std::size_t>(inst.label)] -= 1.0;
                for (int c = 0; c < k; ++c) {
                    const double d2 = s.p[static_cast<std::size_t>(c)];
                    double* grow = g.w2.data() + static_cast<std::size_t>(c) * h;
                    for (int j = 0; j < h; ++j) grow[j] += d2 * s.a1[static_cast<std::size_t>(j)];
                    g.b2[static_cast<std::size_t>(c)] += d2;
                }
                for (int j = 0; j < h; ++j) {
                    if (s.z1[static_cast<std::size_t>(j)] <= 0.0) {
                        s.d1[static_cast<std::size_t>(j)] = 0.0;
                        continue;
                    }
                    double acc = 0.0;
                    for (int c = 0; c < k; ++c)
                        acc += m.w2[static_cast<std::size_t>(c) * h + j] *
                               s.p[static_cast<std::size_t>(c)];
                    s.d1[static_cast<std::size_t>(j)] = acc;
                }
                for (int j = 0; j < h; ++j) {
                    const double d1 = s.d1[static_cast<std::size_t>(j)];
                    if (d1 == 0.0) continue;
                    double* grow = g.w1.data() + static_cast<std::size_t>(j) * d;
                    for (int i = 0; i < d; ++i) grow[i] += d1 * x[i];
                    g.b1[static_cast<std::size_t>(j)] += d1;
                }
            }

            const double inv = 1.0 / bs;
            for (std::size_t i = 0; i < m.w1.size(); ++i) {
                vel.w1[i] = beta * vel.w1[i] + g.w1[i] * inv + cfg.l2_penalty * m.w1[i];
                m.w1[i] -= step * vel.w1[i];
            }
            for (std::size_t i = 0; i < m.b1.size(); ++i) {
                vel.b1[i] = beta * vel.b1[i] + g.b1[i] * inv;
                m.b1[i] -= step * vel.b1[i];
            }
            for (std::size_t i = 0; i < m.w2.size(); ++i) {
                vel.w2[i] = beta * vel.w2[i] + g.w2[i] * inv + cfg.l2_penalty * m.w2[i];
                m.w2[i] -= step * vel.w2[i];
            }
            for (std::size_t i = 0; i < m.b2.size(); ++i) {
                vel.b2[i] = beta * vel.b2[i] + g.b2[i] * inv;
                m.b2[i] -= step * vel.b2[i];
            }
        }
        if (!model_finite(m)) return false;
    }
    return true;
}

}  // namespace

MlpModel make_random_model(int input_dim, int hidden_units, int num_classes,
                           std::uint64_t seed) {
    if (hidden_units < kMinHiddenUnits)
        throw ConfigError("hidden_units must be >= " + std::to_string(kMinHiddenUnits));
    MlpModel m;
    m.input_dim = input_dim;
    m.hidden_units = hidden_units;
    m.output_dim = num_classes;
    m.rng_seed = seed;
    m.w1.resize(static_cast<std::size_t>(hidden_units) * input_dim);
    m.b1.assign(static_cast<std::size_t>(hidden_units), 0.0);
    m.w2.resize(static_cast<std::size_t>(num_classes) * hidden_units);
    m.b2.assign(static_cast<std::size_t>(num_classes), 0.0);

    Rng rng(seed);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (double& w : m.w1) w = rng.normal() * s1;
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_units));
    for (double& w : m.w2) w = rng.normal() * s2;
    return m;
}

MlpModel train(const std::vector<LabeledInstance>& data, int hidden_units, int num_classes,
               const TrainConfig& cfg) {
    if (data.empty()) throw DomainError("train: empty data");
    for (const auto& inst : data)
        if (inst.label < 0 || inst.label >= num_classes)
            throw DomainError("train: label " + std::to_string(inst.label) + " outside [0, " +
                              std::to_string(num_classes) + ")");
    if (cfg.epochs < 1 || cfg.step_size <= 0.0)
        throw ConfigError("train: epochs must be >= 1 and step_size > 0");

    const int d = data.front().features.dim();
    MlpModel init = make_random_model(d, hidden_units, num_classes, cfg.rng_seed);

    double step = cfg.step_size;
    for (int attempt = 0; attempt < 2; ++attempt) {
        MlpModel m = init;
        Rng rng(derive_seed(cfg.rng_seed, "sgd"));
        if (run_descent(m, data, cfg, step, rng)) {
            // Never hand back something worse than the starting point.
            if (accuracy_on(m, data) >= accuracy_on(init, data)) return m;
            return init;
        }
        step *= 0.1;
    }
    throw TrainingDivergence("training diverged twice (final step size " +
                             csv::format_double(step) + ")");
}

void mlp_forward(const MlpModel& m, const double* x, double* hidden, double* proba) {
    const int d = m.input_dim;
    const int h = m.hidden_units;
    const int k = m.output_dim;
    for (int j = 0; j < h; ++j) {
        const double* wrow = m.w1.data() + static_cast<std::size_t>(j) * d;
        double z = m.b1[static_cast<std::size_t>(j)];
        for (int i = 0; i < d; ++i) z += wrow[i] * x[i];
        hidden[j] = z > 0.0 ? z : 0.0;
    }
    for (int c = 0; c < k; ++c) {
        const double* wrow = m.w2.data() + static_cast<std::size_t>(c) * h;
        double z = m.b2[static_cast<std::size_t>(c)];
        for (int j = 0; j < h; ++j) z += wrow[j] * hidden[j];
        proba[c] = z;
    }
    softmax_inplace(proba, k);
}

std::vector<double> predict_proba(const MlpModel& m, const FeatureVector& x) {
    if (x.dim() != m.input_dim)
        throw DomainError("predict: input dimension " + std::to_string(x.dim()) +
                          " does not match model dimension " + std::to_string(m.input_dim));
    std::vector<double> hidden(static_cast<std::size_t>(m.hidden_units));
    std::vector<double> proba(static_cast<std::size_t>(m.output_dim));
    mlp_forward(m, x.coords.data(), hidden.data(), proba.data());
    return proba;
}

int predict(const MlpModel& m, const FeatureVector& x) {
    auto proba = predict_proba(m, x);
    int best = 0;
    for (int c = 1; c < m.output_dim; ++c)
        if (proba[static_cast<std::size_t>(c)] > proba[static_cast<std::size_t>(best)])
            best = c;
    return best;
}

double accuracy_on(const MlpModel& m, const std::vector<LabeledInstance>& data) {
    if (data.empty()) return 0.0;
    std::vector<double> hidden(static_cast<std::size_t>(m.hidden_units));
    std::vector<double> proba(static_cast<std::size_t>(m.output_dim));
    long correct = 0;
    for (const auto& inst : data) {
        mlp_forward(m, inst.features.coords.data(), hidden.data(), proba.data());
        int best = 0;
        for (int c = 1; c < m.output_dim; ++c)
            if (proba[static_cast<std::size_t>(c)] > proba[static_cast<std::size_t>(best)])
                best = c;
        if (best == inst.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double training_loss(const MlpModel& m, const std::vector<LabeledInstance>& data,
                     double l2_penalty) {
    std::vector<double> hidden(static_cast<std::size_t>(m.hidden_units));
    std::vector<double> proba(static_cast<std::size_t>(m.output_dim));
    double loss = 0.0;
    for (const auto& inst : data) {
        mlp_forward(m, inst.features.coords.data(), hidden.data(), proba.data());
        loss += -std::log(std::max(proba[static_cast<std::size_t>(inst.label)], 1e-300));
    }
    loss /= static_cast<double>(data.size());
    double reg = 0.0;
    for (double w : m.w1) reg += w * w;
    for (double w : m.w2) reg += w * w;
    return loss + 0.5 * l2_penalty * reg;
}

Gradients training_gradient(const MlpModel& m, const std::vector<LabeledInstance>& data,
                            double l2_penalty) {
    const int d = m.input_dim;
    const int h = m.hidden_units;
    const int k = m.output_dim;
    Gradients g;
    g.w1.assign(m.w1.size(), 0.0);
    g.b1.assign(m.b1.size(), 0.0);
    g.w2.assign(m.w2.size(), 0.0);
    g.b2.assign(m.b2.size(), 0.0);

    std::vector<double> z1(static_cast<std::size_t>(h)), a1(static_cast<std::size_t>(h)),
        p(static_cast<std::size_t>(k));
    for (const auto& inst : data) {
        const double* x = inst.features.coords.data();
        for (int j = 0; j < h; ++j) {
            const double* wrow = m.w1.data() + static_cast<std::size_t>(j) * d;
            double z = m.b1[static_cast<std::size_t>(j)];
            for (int i = 0; i < d; ++i) z += wrow[i] * x[i];
            z1[static_cast<std::size_t>(j)] = z;
            a1[static_cast<std::size_t>(j)] = z > 0.0 ? z : 0.0;
        }
        for (int c = 0; c < k; ++c) {
            const double* wrow = m.w2.data() + static_cast<std::size_t>(c) * h;
            double z = m.b2[static_cast<std::size_t>(c)];
            for (int j = 0; j < h; ++j) z += wrow[j] * a1[static_cast<std::size_t>(j)];
            p[static_cast<std::size_t>(c)] = z;
        }
        softmax_inplace(p.data(), k);
        p[static_cast<std::size_t>(inst.label)] -= 1.0;

        for (int c = 0; c < k; ++c) {
            double* grow = g.w2.data() + static_cast<std::size_t>(c) * h;
            for (int j = 0; j < h; ++j)
                grow[j] += p[static_cast<std::size_t>(c)] * a1[static_cast<std::size_t>(j)];
            g.b2[static_cast<std::size_t>(c)] += p[static_cast<std::size_t>(c)];
        }
        for (int j = 0; j < h; ++j) {
            if (z1[static_cast<std::size_t>(j)] <= 0.0) continue;
            double acc = 0.0;
            for (int c = 0; c < k; ++c)
                acc += m.w2[static_cast<std::size_t>(c) * h + j] * p[static_cast<std::size_t>(c)];
            double* grow = g.w1.data() + static_cast<std::size_t>(j) * d;
            for (int i = 0; i < d; ++i) grow[i] += acc * x[i];
            g.b1[static_cast<std::size_t>(j)] += acc;
        }
    }

    const double inv = 1.0 / static_cast<double>(data.size());
    for (std::size_t i = 0; i < g.w1.size(); ++i)
        g.w1[i] = g.w1[i] * inv + l2_penalty * m.w1[i];
    for (double& v : g.b1) v *= inv;
    for (std::size_t i = 0; i < g.w2.size(); ++i)
        g.w2[i] = g.w2[i] * inv + l2_penalty * m.w2[i];
    for (double& v : g.b2) v *= inv;
    return g;
}

std::vector<std::vector<int>> kfold_partition(int n, int k, std::uint64_t seed) {
    if (k < 2 || k > n)
        throw ConfigError("kfold: need 2 <= k <= n (k=" + std::to_string(k) +
                          ", n=" + std::to_string(n) + ")");
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "folds"));
    rng.shuffle(order);

    std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
    const int base = n / k;
    const int extra = n % k;
    int pos = 0;
    for (int f = 0; f < k; ++f) {
        const int size = base + (f < extra ? 1 : 0);
        folds[static_cast<std::size_t>(f)].assign(order.begin() + pos,
                                                  order.begin() + pos + size);
        pos += size;
    }
    return folds;
}

double kfold_cv_error(const std::vector<LabeledInstance>& data, int hidden_units,
                      int num_classes, int k, const TrainConfig& cfg) {
    const int n = static_cast<int>(data.size());
    auto folds = kfold_partition(n, k, cfg.rng_seed);

    std::vector<double> fold_error(static_cast<std::size_t>(k), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int f = 0; f < k; ++f) {
        std::vector<char> held(static_cast<std::size_t>(n), 0);
        for (int i : folds[static_cast<std::size_t>(f)]) held[static_cast<std::size_t>(i)] = 1;
        std::vector<LabeledInstance> train_set;
        train_set.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            if (!held[static_cast<std::size_t>(i)]) train_set.push_back(data[static_cast<std::size_t>(i)]);

        TrainConfig fold_cfg = cfg;
        fold_cfg.rng_seed = derive_seed(cfg.rng_seed, "fold", static_cast<std::uint64_t>(f));
        MlpModel m = train(train_set, hidden_units, num_classes, fold_cfg);

        int wrong = 0;
        for (int i : folds[static_cast<std::size_t>(f)])
            if (predict(m, data[static_cast<std::size_t>(i)].features) !=
                data[static_cast<std::size_t>(i)].label)
                ++wrong;
        fold_error[static_cast<std::size_t>(f)] =
            static_cast<double>(wrong) /
            static_cast<double>(folds[static_cast<std::size_t>(f)].size());
    }

    double sum = 0.0;
    for (double e : fold_error) sum += e;
    return sum / static_cast<double>(k);
}

CvReport adapt_hidden_units(const std::vector<LabeledInstance>& data, int current,
                            int num_classes, int k, const TrainConfig& cfg) {
    if (current < kMinHiddenUnits)
        throw ConfigError("adapt_hidden_units: current must be >= 2");
    std::vector<int> candidates{std::max(kMinHiddenUnits, current / 2), current, 2 * current};
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    CvReport report;
    report.candidate_hidden_units = candidates;
    report.mean_error.resize(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        report.mean_error[i] = kfold_cv_error(data, candidates[i], num_classes, k, cfg);

    // Candidates are sorted ascending, so strict < keeps the smaller network
    // on ties.
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i)
        if (report.mean_error[i] < report.mean_error[best]) best = i;
    report.chosen = candidates[best];
    return report;
}

namespace {

void write_block(std::ostream& out, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ' ';
        out << csv::format_double(v[i]);
    }
    out << "\n";
}

std::vector<double> read_block(std::istream& in, std::size_t count, const char* what) {
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i)
        if (!(in >> v[i])) throw LoadError(std::string("model file: truncated ") + what);
    return v;
}

}  // namespace

void save_model(std::ostream& out, const MlpModel& m) {
    out << m.input_dim << ',' << m.hidden_units << ',' << m.output_dim << ',' << m.rng_seed
        << "\n";
    write_block(out, m.w1);
    write_block(out, m.b1);
    write_block(out, m.w2);
    write_block(out, m.b2);
}

MlpModel load_model(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw LoadError("model file: missing header");
    auto fields = csv::split_line(header);
    if (fields.size() != 4) throw LoadError("model file: bad header '" + header + "'");
    MlpModel m;
    m.input_dim = static_cast<int>(csv::parse_long(fields[0], "model input_dim"));
    m.hidden_units = static_cast<int>(csv::parse_long(fields[1], "model hidden_units"));
    m.output_dim = static_cast<int>(csv::parse_long(fields[2], "model output_dim"));
    m.rng_seed = static_cast<std::uint64_t>(csv::parse_u64(fields[3], "model seed"));
    if (m.input_dim < 1 || m.hidden_units < kMinHiddenUnits || m.output_dim < 2)
        throw LoadError("model file: implausible header '" + header + "'");
    m.w1 = read_block(in, static_cast<std::size_t>(m.hidden_units) * m.input_dim, "w1");
    m.b1 = read_block(in, static_cast<std::size_t>(m.hidden_units), "b1");
    m.w2 = read_block(in, static_cast<std::size_t>(m.output_dim) * m.hidden_units, "w2");
    m.b2 = read_block(in, static_cast<std::size_t>(m.output_dim), "b2");
    in.ignore(1, '\n');
    return m;
}

}  // namespace qbag
