#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sdlab {

enum class GramDist { Uniform01, Bernoulli };

struct GramSpec {
    std::size_t n = 1000;
    double p = 0.45;
    GramDist dist = GramDist::Uniform01;
    double q = 0.8;  // Bernoulli success probability
    double lambda_hat = 0.75;
    double c_nominal = 0.25;
    std::uint64_t seed = 0;

    /// Expected off-diagonal entry: 1/4 for Uniform01, q^2 for Bernoulli(q).
    static double nominal_c(GramDist dist, double q);
    void validate() const;
};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One n x n diagonal block K = offdiag(Z Z^T / n) + I, never materialized.
class BlockKernel {
public:
    explicit BlockKernel(RowMajorMatrix Z);
    std::size_t size() const noexcept { return static_cast<std::size_t>(Z_.rows()); }
    /// out = Z (Z^T v) / n + (1 - diag(Z Z^T)/n) o v
    void apply(const Eigen::VectorXd& v, Eigen::VectorXd& out) const;
    const RowMajorMatrix& factor() const noexcept { return Z_; }
    /// Mean of the off-diagonal entries, in O(n^2).
    double mean_offdiag() const;

private:
    RowMajorMatrix Z_;
    Eigen::VectorXd shift_;
};

struct GramFactors {
    std::size_t n = 0;
    BlockKernel K1;  // true class 1
    BlockKernel K0;  // true class 0
    std::vector<int> labels;       // 2n observed labels
    std::vector<int> true_labels;  // first n are 1, last n are 0
    std::size_t flipped = 0;       // per class
};

/// Z1 uses counter stream 1 and Z0 stream 2; entry (i, j) is draw i*n + j.
GramFactors build_factors(const GramSpec& spec);

using MatVec = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

enum class FitMethod { NewtonCG, FixedPoint };

struct FitOptions {
    double tol = 1e-9;
    std::size_t max_iter = 100000;
    FitMethod method = FitMethod::NewtonCG;
};

struct KernelModel {
    Eigen::VectorXd dual;
    Eigen::VectorXd targets;
    Eigen::VectorXd predictions;  // sigmoid(K a)
    double residual = 0.0;        // max_i |lh a_i - t_i + sigmoid((K a)_i)|
    std::size_t iterations = 0;
};

/// Solves lh a = t - sigmoid(K a) for the dual vector a.
KernelModel fit_dual(const MatVec& K, const Eigen::VectorXd& targets, double lambda_hat,
                     const FitOptions& opt = {}, const Eigen::VectorXd* warm_start = nullptr);

double stationarity_residual(const MatVec& K, const Eigen::VectorXd& a,
                             const Eigen::VectorXd& targets, double lambda_hat);

struct TableRow {
    std::string model;  // teacher | student
    std::string group;  // bad | good
    double avg_pred = 0.0;
    double a3_pred = 0.0;
};

struct TableResult {
    std::vector<TableRow> rows;      // true-label-1 groups
    std::vector<TableRow> class0;    // true-label-0 groups, same layout
    double max_residual = 0.0;
};

TableResult run_table(const GramSpec& spec, const FitOptions& opt = {});

}  // namespace sdlab
