#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace sdlab {

/// Spectrum of X and the projections of theta* onto its left singular vectors.
struct SpectralDesign {
    std::vector<double> sigma;  // descending, strictly positive
    std::vector<double> s;      // s_j = <theta*, u_j>
    double null_mass = 0.0;     // squared norm of theta* outside span(U)
    std::size_t d = 0;

    std::size_t rank() const noexcept { return sigma.size(); }
    double theta(std::size_t j) const noexcept { return s[j] * s[j]; }
    /// Throws InvalidInput when an invariant is violated.
    void validate() const;
};

struct NoiseSpec {
    double gamma_sq = 0.0;

    void validate() const;
};

struct DenseRidgeProblem {
    Eigen::MatrixXd X;           // d x n
    Eigen::VectorXd theta_star;  // d
    double gamma = 0.0;
    double lambda = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Labels Y = X^T theta* + eta, eta ~ N(0, gamma^2 I), drawn from stream `draw`.
Eigen::VectorXd sample_labels(const DenseRidgeProblem& problem, std::uint64_t draw);

Eigen::VectorXd teacher_fit(const DenseRidgeProblem& problem, const Eigen::VectorXd& Y);

Eigen::VectorXd student_fit(const DenseRidgeProblem& problem, const Eigen::VectorXd& Y,
                            const Eigen::VectorXd& teacher, double xi);

/// Student estimate rebuilt from the SVD of X, independent of the dense solve.
Eigen::VectorXd student_fit_spectral(const DenseRidgeProblem& problem,
                                     const Eigen::VectorXd& Y, double xi);

/// Dense to spectral. Singular values below 1e-12 * sigma_1 go to null_mass.
SpectralDesign to_spectral(const DenseRidgeProblem& problem);

double bias_sq(const SpectralDesign& design, double lambda, double xi);
double variance(const SpectralDesign& design, const NoiseSpec& noise, double lambda, double xi);
double expected_error(const SpectralDesign& design, const NoiseSpec& noise, double lambda,
                      double xi);

/// Monte Carlo estimate of E||theta_S(xi) - theta*||^2 over eta. Requires draws >= 100.
McEstimate mc_expected_error(const DenseRidgeProblem& problem, double xi, std::size_t draws);

}  // namespace sdlab
