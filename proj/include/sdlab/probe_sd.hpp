#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace sdlab {

struct FeatureDataset {
    Eigen::MatrixXd features;  // N x d
    std::vector<int> labels;   // N entries in [0, C)
    int num_classes = 0;
    std::optional<std::vector<int>> superclass;  // class -> group id
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;

    void validate() const;
};

enum class CorruptionKind { Random, Hierarchical, Adversarial };

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::Random;
    double level = 0.0;
    std::size_t k = 5;
    std::uint64_t seed = 0;
};

struct ProbeConfig {
    double lambda = 1e-2;
    double xi = 1.0;
    double step_size = 1.0;  // <= 0: pick from the learning-rate grid by final training loss
    std::size_t epochs = 300;
    std::size_t batch_size = 0;  // 0 = full batch
    std::uint64_t seed = 0;
};

struct FitReport {
    Eigen::MatrixXd W;  // C x d
    double loss = 0.0;
    double grad_norm = 0.0;
    double step_size = 0.0;
    std::size_t steps = 0;
};

struct ProbeResult {
    double xi = 0.0;
    double teacher_test_acc = 0.0;
    double student_test_acc = 0.0;
    double improvement = 0.0;
    std::vector<std::pair<double, double>> per_class_variability;  // (teacher, student)
};

/// {0.001, 0.005, 0.01, 0.05, 0.1, 0.5}
const std::vector<double>& default_lr_grid();

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);
Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W);
Eigen::MatrixXd one_hot(const std::vector<int>& labels, int num_classes);

/// Mean cross-entropy against target rows Q plus (lambda/2) ||W||_F^2.
double softmax_objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Q,
                         const Eigen::MatrixXd& W, double lambda);
Eigen::MatrixXd softmax_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Q,
                                 const Eigen::MatrixXd& W, double lambda);

/// xi * CE(teacher) + (1 - xi) * CE(hard labels) + ridge, written term by term.
double xi_mixed_objective(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                          const Eigen::MatrixXd& teacher_probs, double xi,
                          const Eigen::MatrixXd& W, double lambda);
Eigen::MatrixXd xi_mixed_gradient(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                  const Eigen::MatrixXd& teacher_probs, double xi,
                                  const Eigen::MatrixXd& W, double lambda);

/// Full-batch gradient descent from W = 0. The step halves whenever the loss
/// fails to decrease. Q rows must sum to 1 within 1e-6.
FitReport fit_softmax(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Q, double lambda,
                      const ProbeConfig& opt);
FitReport fit_softmax(const Eigen::MatrixXd& X, const std::vector<int>& labels, int num_classes,
                      double lambda, const ProbeConfig& opt);

/// Student fit on the mixed target xi * teacher + (1 - xi) * onehot(labels).
FitReport distill(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                  const Eigen::MatrixXd& teacher_probs, double xi, double lambda,
                  const ProbeConfig& opt);

/// Row c is the mean predicted probability vector over samples labelled c.
Eigen::MatrixXd class_confusion(const Eigen::MatrixXd& probs, const std::vector<int>& labels,
                                int num_classes);

/// The k classes with the largest confusion score for class c, excluding c.
/// Ties go to the smaller class index.
std::vector<int> hard_classes(const Eigen::MatrixXd& confusion, int c, std::size_t k);

std::vector<int> corrupt_labels(const std::vector<int>& labels, int num_classes,
                                const CorruptionSpec& spec,
                                const std::vector<int>* superclass = nullptr,
                                const Eigen::MatrixXd* confusion = nullptr);

double accuracy(const Eigen::MatrixXd& probs, const std::vector<int>& labels);

/// Max minus min of the true-class probability over samples of class c.
double per_class_variability(const Eigen::MatrixXd& probs, const std::vector<int>& labels, int c);

std::vector<ProbeResult> xi_sweep(const FeatureDataset& data, const CorruptionSpec& corruption,
                                  const std::vector<double>& xi_grid, const ProbeConfig& config);

struct SyntheticSpec {
    int num_classes = 10;
    std::size_t dim = 50;
    std::size_t train_per_class = 500;
    std::size_t test_per_class = 200;
    double separation = 3.0;  // norm of each class mean
    int superclass_size = 2;  // consecutive classes share a group
    std::uint64_t seed = 0;
};

/// Isotropic unit-variance Gaussian clusters around random mean directions.
FeatureDataset synthetic_clusters(const SyntheticSpec& spec);

/// Subsets of rows and labels.
Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<std::size_t>& idx);
std::vector<int> take(const std::vector<int>& v, const std::vector<std::size_t>& idx);

}  // namespace sdlab
