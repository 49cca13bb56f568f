#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "qbag/domain.hpp"

namespace qbag {

struct TrainConfig {
    int epochs = 900;
    double step_size = 0.15;
    int minibatch_size = 32;
    double momentum = 0.9;  // classical (heavy-ball); 0 disables
    double l2_penalty = 1e-4;
    std::uint64_t rng_seed = 0;
};

/// Single-hidden-layer ReLU network with a softmax output head.
/// w1 is hidden x input (row-major), w2 is output x hidden.
struct MlpModel {
    int input_dim = 0;
    int hidden_units = 0;
    int output_dim = 0;
    std::vector<double> w1, b1, w2, b2;
    std::uint64_t rng_seed = 0;

    std::size_t parameter_count() const {
        return w1.size() + b1.size() + w2.size() + b2.size();
    }
};

struct CvReport {
    std::vector<int> candidate_hidden_units;
    std::vector<double> mean_error;
    int chosen = 0;
};

inline constexpr int kMinHiddenUnits = 2;

/// Random model with weights scaled by 1/sqrt(fan_in) and zero biases.
MlpModel make_random_model(int input_dim, int hidden_units, int num_classes,
                           std::uint64_t seed);

/// Minibatch gradient descent on softmax cross-entropy with an L2 penalty on
/// the weights. Deterministic given (data order, cfg.rng_seed). On a
/// non-finite parameter the run restarts once at one tenth of the step size,
/// then throws TrainingDivergence. The returned model's training accuracy is
/// never below the freshly initialized model's.
MlpModel train(const std::vector<LabeledInstance>& data, int hidden_units, int num_classes,
               const TrainConfig& cfg);

/// Forward pass without allocation. hidden_scratch must hold hidden_units
/// doubles; proba_out must hold output_dim doubles.
void mlp_forward(const MlpModel& model, const double* x, double* hidden_scratch,
                 double* proba_out);

std::vector<double> predict_proba(const MlpModel& model, const FeatureVector& x);

/// Argmax of predict_proba, ties toward the smaller class index.
int predict(const MlpModel& model, const FeatureVector& x);

double accuracy_on(const MlpModel& model, const std::vector<LabeledInstance>& data);

/// Mean cross-entropy over data plus (l2/2) * ||weights||^2.
double training_loss(const MlpModel& model, const std::vector<LabeledInstance>& data,
                     double l2_penalty);

struct Gradients {
    std::vector<double> w1, b1, w2, b2;
};

/// Full-batch analytic gradient of training_loss.
Gradients training_gradient(const MlpModel& model, const std::vector<LabeledInstance>& data,
                            double l2_penalty);

/// Deterministic k-fold split of n items: disjoint folds covering everything,
/// sizes differing by at most one.
std::vector<std::vector<int>> kfold_partition(int n, int k, std::uint64_t seed);

/// Mean misclassification rate over held-out folds; each fold's model is
/// trained from scratch on the remaining folds.
double kfold_cv_error(const std::vector<LabeledInstance>& data, int hidden_units,
                      int num_classes, int k, const TrainConfig& cfg);

/// Cross-validates hidden-unit candidates {max(2, current/2), current,
/// 2*current} and picks the lowest mean error, ties toward fewer units.
CvReport adapt_hidden_units(const std::vector<LabeledInstance>& data, int current,
                            int num_classes, int k, const TrainConfig& cfg);

// Flat text serialization: "d,hidden,K,seed" then one line per parameter
// block (w1, b1, w2, b2), 17 significant digits.
void save_model(std::ostream& out, const MlpModel& model);
MlpModel load_model(std::istream& in);

}  // namespace qbag
