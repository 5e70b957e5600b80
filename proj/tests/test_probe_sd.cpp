#include "oracles.hpp"

#include "sdlab/error.hpp"
#include "sdlab/feature_io.hpp"
#include "sdlab/probe_sd.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

using namespace sdlab;

namespace {

Eigen::MatrixXd random_features(std::uint64_t seed, Eigen::Index n, Eigen::Index d) {
    std::mt19937_64 gen(seed);
    return oracle::gaussian_matrix(gen, n, d);
}

std::vector<int> random_labels(std::uint64_t seed, std::size_t n, int C) {
    std::mt19937_64 gen(seed);
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(gen() % static_cast<std::uint64_t>(C));
    return y;
}

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(1e-12, b.norm());
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "sdlab_probe_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

SyntheticSpec small_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.num_classes = 4;
    s.dim = 6;
    s.train_per_class = 40;
    s.test_per_class = 20;
    s.seed = seed;
    return s;
}

}  // namespace

TEST(Softmax, RowsSumToOne) {
    const Eigen::MatrixXd L = 30.0 * random_features(1, 50, 7);
    const Eigen::MatrixXd P = softmax_rows(L);
    for (Eigen::Index i = 0; i < P.rows(); ++i) EXPECT_NEAR(P.row(i).sum(), 1.0, 1e-9);
    EXPECT_GE(P.minCoeff(), 0.0);
    const Eigen::MatrixXd big = Eigen::MatrixXd::Constant(2, 3, 800.0);
    EXPECT_NEAR(softmax_rows(big)(0, 0), 1.0 / 3.0, 1e-15);
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
    const Eigen::MatrixXd X = random_features(2, 12, 5);
    const Eigen::MatrixXd W = 0.3 * random_features(3, 3, 5);
    const auto y = random_labels(4, 12, 3);
    const Eigen::MatrixXd Q1 = one_hot(y, 3);
    const Eigen::MatrixXd Q2 = softmax_rows(random_features(5, 12, 3));
    for (const Eigen::MatrixXd* Q : {&Q1, &Q2}) {
        auto f = [&](const Eigen::MatrixXd& V) { return softmax_objective(X, *Q, V, 0.2); };
        EXPECT_LT(rel_err(softmax_gradient(X, *Q, W, 0.2), oracle::numeric_gradient(f, W)), 1e-5);
    }
    for (double xi : {-0.5, 0.0, 0.3, 1.0, 1.7}) {
        auto f = [&](const Eigen::MatrixXd& V) { return xi_mixed_objective(X, y, Q2, xi, V, 0.2); };
        const Eigen::MatrixXd g = xi_mixed_gradient(X, y, Q2, xi, W, 0.2);
        EXPECT_LT(rel_err(g, oracle::numeric_gradient(f, W)), 1e-5) << xi;
        const Eigen::MatrixXd mixed = xi * Q2 + (1.0 - xi) * Q1;
        EXPECT_LT((g - softmax_gradient(X, mixed, W, 0.2)).cwiseAbs().maxCoeff(), 1e-8) << xi;
    }
}

TEST(Softmax, MixedObjectiveDiffersByConstant) {
    const Eigen::MatrixXd X = random_features(6, 10, 4);
    const auto y = random_labels(7, 10, 3);
    const Eigen::MatrixXd T = softmax_rows(random_features(8, 10, 3));
    const double xi = 0.6;
    const Eigen::MatrixXd mixed = xi * T + (1.0 - xi) * one_hot(y, 3);
    const Eigen::MatrixXd W1 = random_features(9, 3, 4), W2 = random_features(10, 3, 4);
    const double d1 = xi_mixed_objective(X, y, T, xi, W1, 0.1) - softmax_objective(X, mixed, W1, 0.1);
    const double d2 = xi_mixed_objective(X, y, T, xi, W2, 0.1) - softmax_objective(X, mixed, W2, 0.1);
    EXPECT_NEAR(d1, d2, 1e-12);
}

TEST(FitSoftmax, TwoSampleBisectionOracle) {
    // X = I, one sample per class: the fit is W = (w/2)[[1,-1],[-1,1]] with sigmoid(w) = 1 - lambda w.
    const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(2, 2);
    const std::vector<int> y = {0, 1};
    for (double lambda : {0.05, 0.3, 1.0}) {
        double lo = 0.0, hi = 1.0 / lambda;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (1.0 / (1.0 + std::exp(-mid)) - 1.0 + lambda * mid > 0.0)
                hi = mid;
            else
                lo = mid;
        }
        const double w = 0.5 * (lo + hi);
        ProbeConfig cfg;
        cfg.epochs = 100000;
        const FitReport r = fit_softmax(X, y, 2, lambda, cfg);
        const Eigen::MatrixXd P = predict_proba(X, r.W);
        EXPECT_NEAR(P(0, 0), 1.0 / (1.0 + std::exp(-w)), 1e-6) << lambda;
        EXPECT_NEAR(P(1, 1), 1.0 / (1.0 + std::exp(-w)), 1e-6) << lambda;
        EXPECT_NEAR(r.W(0, 0) - r.W(1, 0), w, 1e-6) << lambda;
    }
}

TEST(FitSoftmax, HeavyRidgeShrinks) {
    const Eigen::MatrixXd X = random_features(11, 30, 4);
    const auto y = random_labels(12, 30, 3);
    ProbeConfig cfg;
    cfg.step_size = 1e-6;
    const FitReport r = fit_softmax(X, y, 3, 1e6, cfg);
    EXPECT_LE(r.W.norm(), 1e-3);
}

TEST(FitSoftmax, OversizedStepStillDescends) {
    const Eigen::MatrixXd X = random_features(13, 40, 5);
    const auto y = random_labels(14, 40, 3);
    ProbeConfig cfg;
    cfg.step_size = 500.0;
    cfg.epochs = 50;
    const FitReport r = fit_softmax(X, y, 3, 0.01, cfg);
    const double start = softmax_objective(X, one_hot(y, 3), Eigen::MatrixXd::Zero(3, 5), 0.01);
    EXPECT_LT(r.loss, start);
    EXPECT_LT(r.step_size, 500.0);
    EXPECT_NEAR(r.loss, softmax_objective(X, one_hot(y, 3), r.W, 0.01), 1e-14);
}

TEST(FitSoftmax, RejectsBadTargets) {
    const Eigen::MatrixXd X = random_features(15, 4, 2);
    EXPECT_THROW(fit_softmax(X, std::vector<int>{0, 1, 2, 1}, 2, 0.1, ProbeConfig{}), InvalidInput);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Constant(4, 2, 0.4);
    EXPECT_THROW(fit_softmax(X, Q, 0.1, ProbeConfig{}), InvalidInput);
    EXPECT_THROW(fit_softmax(X, one_hot({0, 1, 0, 1}, 2), 0.0, ProbeConfig{}), InvalidInput);
}

TEST(Distill, XiZeroIsTeacher) {
    const Eigen::MatrixXd X = random_features(16, 60, 5);
    const auto y = random_labels(17, 60, 4);
    ProbeConfig cfg;
    cfg.epochs = 80;
    const FitReport t = fit_softmax(X, y, 4, 0.01, cfg);
    const FitReport s = distill(X, y, predict_proba(X, t.W), 0.0, 0.01, cfg);
    EXPECT_EQ(s.W, t.W);
}

TEST(Distill, XiOneIgnoresHardLabels) {
    const Eigen::MatrixXd X = random_features(18, 60, 5);
    const auto y = random_labels(19, 60, 4);
    auto z = y;
    std::reverse(z.begin(), z.end());
    const Eigen::MatrixXd T = softmax_rows(random_features(20, 60, 4));
    ProbeConfig cfg;
    cfg.epochs = 80;
    EXPECT_EQ(distill(X, y, T, 1.0, 0.01, cfg).W, distill(X, z, T, 1.0, 0.01, cfg).W);
}

TEST(Distill, LargeXiStillDescends) {
    const Eigen::MatrixXd X = random_features(21, 60, 5);
    const auto y = random_labels(22, 60, 4);
    const Eigen::MatrixXd T = softmax_rows(random_features(23, 60, 4));
    ProbeConfig cfg;
    cfg.epochs = 100;
    const FitReport r = distill(X, y, T, 2.0, 0.05, cfg);
    const double start = xi_mixed_objective(X, y, T, 2.0, Eigen::MatrixXd::Zero(4, 5), 0.05);
    EXPECT_LT(xi_mixed_objective(X, y, T, 2.0, r.W, 0.05), start);
}

TEST(Corruption, LevelZeroAndOne) {
    const auto y = random_labels(24, 500, 5);
    CorruptionSpec spec;
    spec.level = 0.0;
    EXPECT_EQ(corrupt_labels(y, 5, spec), y);
    std::vector<int> two(300);
    for (std::size_t i = 0; i < two.size(); ++i) two[i] = static_cast<int>(i % 2);
    spec.level = 1.0;
    const auto flipped = corrupt_labels(two, 2, spec);
    for (std::size_t i = 0; i < two.size(); ++i) EXPECT_EQ(flipped[i], 1 - two[i]);
}

TEST(Corruption, RandomFlipRate) {
    const auto y = random_labels(25, 50000, 100);
    CorruptionSpec spec;
    spec.level = 0.5;
    spec.seed = 3;
    const auto z = corrupt_labels(y, 100, spec);
    std::size_t changed = 0;
    std::vector<std::size_t> hits(100, 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (z[i] != y[i]) {
            ++changed;
            ++hits[static_cast<std::size_t>(z[i])];
        }
        EXPECT_GE(z[i], 0);
        EXPECT_LT(z[i], 100);
    }
    EXPECT_NEAR(static_cast<double>(changed) / 50000.0, 0.5, 0.01);
    EXPECT_EQ(z, corrupt_labels(y, 100, spec));
    spec.seed = 4;
    EXPECT_NE(z, corrupt_labels(y, 100, spec));
}

TEST(Corruption, HierarchicalStaysInGroup) {
    const std::vector<int> super = {0, 0, 0, 1, 1, 1};
    const auto y = random_labels(26, 2000, 6);
    CorruptionSpec spec;
    spec.kind = CorruptionKind::Hierarchical;
    spec.level = 0.7;
    const auto z = corrupt_labels(y, 6, spec, &super);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        EXPECT_EQ(super[static_cast<std::size_t>(z[i])], super[static_cast<std::size_t>(y[i])]);
        changed += z[i] != y[i];
    }
    EXPECT_NEAR(static_cast<double>(changed) / 2000.0, 0.7, 0.04);
    EXPECT_THROW(corrupt_labels(y, 6, spec), InvalidInput);
    const std::vector<int> singletons = {0, 1, 2, 3, 4, 5};
    EXPECT_THROW(corrupt_labels(y, 6, spec, &singletons), InvalidInput);
}

TEST(Corruption, AdversarialTargetsHardClasses) {
    const int C = 6;
    Eigen::MatrixXd conf = softmax_rows(random_features(27, C, C));
    const auto y = random_labels(28, 3000, C);
    CorruptionSpec spec;
    spec.kind = CorruptionKind::Adversarial;
    spec.level = 0.5;
    spec.k = 2;
    const auto z = corrupt_labels(y, C, spec, nullptr, &conf);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (z[i] == y[i]) continue;
        const auto hard = hard_classes(conf, y[i], 2);
        EXPECT_TRUE(std::find(hard.begin(), hard.end(), z[i]) != hard.end());
    }
    EXPECT_THROW(corrupt_labels(y, C, spec), InvalidInput);
    spec.k = 6;
    EXPECT_THROW(corrupt_labels(y, C, spec, nullptr, &conf), InvalidInput);
}

TEST(HardClasses, TopKWithTies) {
    Eigen::MatrixXd conf(4, 4);
    conf << 0.4, 0.2, 0.2, 0.2,
            0.1, 0.5, 0.3, 0.1,
            0.3, 0.3, 0.1, 0.3,
            0.0, 0.0, 0.0, 1.0;
    EXPECT_EQ(hard_classes(conf, 0, 2), (std::vector<int>{1, 2}));
    EXPECT_EQ(hard_classes(conf, 1, 2), (std::vector<int>{2, 0}));
    EXPECT_EQ(hard_classes(conf, 2, 3), (std::vector<int>{0, 1, 3}));
    EXPECT_EQ(hard_classes(conf, 3, 1), (std::vector<int>{0}));
}

TEST(Confusion, RowsAreClassMeans) {
    const Eigen::MatrixXd P = softmax_rows(random_features(29, 9, 3));
    const std::vector<int> y = {0, 1, 2, 0, 1, 2, 0, 0, 1};
    const Eigen::MatrixXd conf = class_confusion(P, y, 3);
    Eigen::RowVectorXd m = (P.row(0) + P.row(3) + P.row(6) + P.row(7)) / 4.0;
    EXPECT_LT((conf.row(0) - m).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Variability, Cases) {
    Eigen::MatrixXd P(4, 2);
    P << 0.9, 0.1, 0.6, 0.4, 0.3, 0.7, 0.2, 0.8;
    const std::vector<int> y = {0, 0, 1, 0};
    EXPECT_NEAR(per_class_variability(P, y, 0), 0.9 - 0.2, 1e-15);
    EXPECT_EQ(per_class_variability(P, y, 1), 0.0);
    const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(4, 2, 0.5);
    EXPECT_EQ(per_class_variability(flat, y, 0), 0.0);
    EXPECT_THROW(per_class_variability(P, std::vector<int>{0, 0, 0, 0}, 1), InvalidInput);
    EXPECT_DOUBLE_EQ(accuracy(P, y), 0.75);
}

TEST(Sweep, ZeroGridHasNoImprovement) {
    const FeatureDataset data = synthetic_clusters(small_spec(1));
    CorruptionSpec corr;
    corr.level = 0.3;
    corr.seed = 2;
    ProbeConfig cfg;
    cfg.epochs = 60;
    const auto res = xi_sweep(data, corr, {0.0, 1.0}, cfg);
    ASSERT_EQ(res.size(), 2u);
    EXPECT_EQ(res[0].improvement, 0.0);
    EXPECT_EQ(res[0].student_test_acc, res[0].teacher_test_acc);
    EXPECT_EQ(res[1].teacher_test_acc, res[0].teacher_test_acc);
    EXPECT_NEAR(res[1].improvement, res[1].student_test_acc - res[1].teacher_test_acc, 1e-15);
    EXPECT_EQ(res[1].per_class_variability.size(), 4u);
    EXPECT_THROW(xi_sweep(data, corr, {}, cfg), InvalidInput);
}

TEST(Synthetic, ShapeAndDeterminism) {
    const FeatureDataset a = synthetic_clusters(small_spec(5));
    const FeatureDataset b = synthetic_clusters(small_spec(5));
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.features.rows(), 4 * 60);
    EXPECT_EQ(a.features.cols(), 6);
    EXPECT_EQ(a.train.size(), 160u);
    EXPECT_EQ(a.test.size(), 80u);
    ASSERT_TRUE(a.superclass.has_value());
    EXPECT_EQ(*a.superclass, (std::vector<int>{0, 0, 1, 1}));
    a.validate();
    EXPECT_NE(synthetic_clusters(small_spec(6)).features, a.features);
}

TEST(FeatureIo, CsvRoundTrip) {
    const Eigen::MatrixXd X = random_features(30, 7, 3);
    const std::vector<int> y = {0, 1, 2, 1, 0, 2, 2};
    const auto path = scratch("feat.csv").string();
    write_features_csv(path, X, y);
    const FeatureDataset d = read_features(path);
    EXPECT_LT((d.features - X).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(d.labels, y);
    EXPECT_EQ(d.num_classes, 3);
}

TEST(FeatureIo, BinaryRoundTrip) {
    const Eigen::MatrixXd X = random_features(31, 9, 4).cast<float>().cast<double>();
    const std::vector<int> y = {3, 1, 2, 1, 0, 2, 2, 0, 0};
    const auto path = scratch("feat.bin").string();
    write_features_binary(path, X, y);
    EXPECT_TRUE(std::filesystem::exists(labels_path_for(path)));
    const FeatureDataset d = read_features(path);
    EXPECT_EQ(d.features, X);
    EXPECT_EQ(d.labels, y);
    EXPECT_EQ(d.num_classes, 4);
    EXPECT_TRUE(d.train.empty());
}

TEST(FeatureIo, Errors) {
    EXPECT_THROW(read_features(scratch("missing.csv").string()), IoError);
    const auto path = scratch("bad.csv").string();
    {
        std::ofstream out(path);
        out << "a,b,label\n1,2,0\n";
    }
    EXPECT_THROW(read_features(path), InvalidInput);
}

TEST(FeatureIo, SplitIsDeterministicPartition) {
    FeatureDataset d;
    d.features = random_features(32, 103, 2);
    d.labels = random_labels(33, 103, 3);
    d.num_classes = 3;
    FeatureDataset e = d;
    random_split(d, 0.2, 9);
    random_split(e, 0.2, 9);
    EXPECT_EQ(d.test, e.test);
    EXPECT_EQ(d.train, e.train);
    EXPECT_EQ(d.test.size(), 21u);
    std::set<std::size_t> all(d.train.begin(), d.train.end());
    all.insert(d.test.begin(), d.test.end());
    EXPECT_EQ(all.size(), 103u);
    FeatureDataset f = d;
    random_split(f, 0.2, 10);
    EXPECT_NE(f.test, d.test);
    EXPECT_THROW(random_split(f, 1.0, 1), InvalidInput);
}
