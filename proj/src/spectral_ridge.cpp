#include "sdlab/spectral_ridge.hpp"

#include "sdlab/error.hpp"
#include "sdlab/rng.hpp"

#include <cmath>
#include <random>
#include <string>

namespace sdlab {

namespace {

void require_lambda(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw InvalidInput("lambda must be positive and finite");
}

Eigen::LLT<Eigen::MatrixXd> factor(const DenseRidgeProblem& p) {
    const Eigen::Index d = p.X.rows();
    Eigen::MatrixXd A = p.X * p.X.transpose();
    A.diagonal().array() += p.lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success || A.rows() != d)
        throw DegenerateDesign("XX^T + lambda I is not positive definite");
    return llt;
}

}  // namespace

void SpectralDesign::validate() const {
    if (sigma.size() != s.size()) throw InvalidInput("sigma and s differ in length");
    if (sigma.size() > d) throw InvalidInput("rank exceeds ambient dimension");
    if (!(null_mass >= 0.0)) throw InvalidInput("null_mass must be nonnegative");
    for (std::size_t j = 0; j < sigma.size(); ++j) {
        if (!(sigma[j] > 0.0) || !std::isfinite(sigma[j]))
            throw InvalidInput("singular values must be positive");
        if (j > 0 && sigma[j] > sigma[j - 1])
            throw InvalidInput("singular values must be non-increasing");
        if (!std::isfinite(s[j])) throw InvalidInput("non-finite projection");
    }
}

void NoiseSpec::validate() const {
    if (!(gamma_sq >= 0.0) || !std::isfinite(gamma_sq))
        throw InvalidInput("gamma_sq must be nonnegative and finite");
}

void DenseRidgeProblem::validate() const {
    if (X.rows() == 0 || X.cols() == 0) throw InvalidInput("empty design matrix");
    if (theta_star.size() != X.rows())
        throw InvalidInput("theta_star length " + std::to_string(theta_star.size()) +
                           " does not match d = " + std::to_string(X.rows()));
    if (!(gamma >= 0.0)) throw InvalidInput("gamma must be nonnegative");
    require_lambda(lambda);
}

Eigen::VectorXd sample_labels(const DenseRidgeProblem& problem, std::uint64_t draw) {
    problem.validate();
    Eigen::VectorXd Y = problem.X.transpose() * problem.theta_star;
    if (problem.gamma > 0.0) {
        CounterRng eng(problem.seed, draw);
        std::normal_distribution<double> eta(0.0, problem.gamma);
        for (Eigen::Index i = 0; i < Y.size(); ++i) Y[i] += eta(eng);
    }
    return Y;
}

Eigen::VectorXd teacher_fit(const DenseRidgeProblem& problem, const Eigen::VectorXd& Y) {
    problem.validate();
    if (Y.size() != problem.X.cols()) throw InvalidInput("Y length does not match n");
    return factor(problem).solve(problem.X * Y);
}

Eigen::VectorXd student_fit(const DenseRidgeProblem& problem, const Eigen::VectorXd& Y,
                            const Eigen::VectorXd& teacher, double xi) {
    problem.validate();
    if (Y.size() != problem.X.cols()) throw InvalidInput("Y length does not match n");
    if (teacher.size() != problem.X.rows()) throw InvalidInput("teacher length does not match d");
    if (!std::isfinite(xi)) throw InvalidInput("xi must be finite");
    if (xi == 0.0) return teacher;
    Eigen::VectorXd target = problem.X * (problem.X.transpose() * teacher);
    Eigen::VectorXd refit = factor(problem).solve(target);
    return xi * refit + (1.0 - xi) * teacher;
}

Eigen::VectorXd student_fit_spectral(const DenseRidgeProblem& problem,
                                     const Eigen::VectorXd& Y, double xi) {
    problem.validate();
    if (Y.size() != problem.X.cols()) throw InvalidInput("Y length does not match n");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(problem.X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(problem.X.rows());
    if (sv.size() == 0) return out;
    const double cutoff = 1e-12 * sv[0];
    for (Eigen::Index j = 0; j < sv.size(); ++j) {
        if (!(sv[j] > cutoff)) break;
        const double c = problem.lambda / (sv[j] * sv[j]);
        const double coef = (svd.matrixV().col(j).dot(Y) / sv[j]) / (1.0 + c) *
                            (1.0 - xi * c / (1.0 + c));
        out += coef * svd.matrixU().col(j);
    }
    return out;
}

SpectralDesign to_spectral(const DenseRidgeProblem& problem) {
    problem.validate();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(problem.X, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    SpectralDesign out;
    out.d = static_cast<std::size_t>(problem.X.rows());
    Eigen::VectorXd residual = problem.theta_star;
    const double cutoff = sv.size() > 0 ? 1e-12 * sv[0] : 0.0;
    for (Eigen::Index j = 0; j < sv.size(); ++j) {
        if (!(sv[j] > cutoff)) break;
        const double sj = svd.matrixU().col(j).dot(problem.theta_star);
        out.sigma.push_back(sv[j]);
        out.s.push_back(sj);
        residual -= sj * svd.matrixU().col(j);
    }
    out.null_mass = residual.squaredNorm();
    return out;
}

double bias_sq(const SpectralDesign& design, double lambda, double xi) {
    require_lambda(lambda);
    design.validate();
    double total = design.null_mass;
    for (std::size_t j = 0; j < design.rank(); ++j) {
        const double c = lambda / (design.sigma[j] * design.sigma[j]);
        const double shrink = c / (1.0 + c);
        const double boost = 1.0 + xi / (1.0 + c);
        total += design.theta(j) * shrink * shrink * boost * boost;
    }
    return total;
}

double variance(const SpectralDesign& design, const NoiseSpec& noise, double lambda, double xi) {
    require_lambda(lambda);
    design.validate();
    noise.validate();
    if (noise.gamma_sq == 0.0) return 0.0;
    double total = 0.0;
    for (std::size_t j = 0; j < design.rank(); ++j) {
        const double c = lambda / (design.sigma[j] * design.sigma[j]);
        const double damp = 1.0 - xi * c / (1.0 + c);
        total += c / ((1.0 + c) * (1.0 + c)) * damp * damp;
    }
    return noise.gamma_sq / lambda * total;
}

double expected_error(const SpectralDesign& design, const NoiseSpec& noise, double lambda,
                      double xi) {
    return bias_sq(design, lambda, xi) + variance(design, noise, lambda, xi);
}

McEstimate mc_expected_error(const DenseRidgeProblem& problem, double xi, std::size_t draws) {
    problem.validate();
    if (draws < 100) throw InvalidInput("mc_expected_error needs at least 100 draws");
    const Eigen::Index d = problem.X.rows();
    const Eigen::Index n = problem.X.cols();

    // theta_S is linear in Y: theta_S = M Y.
    auto llt = factor(problem);
    Eigen::MatrixXd T = llt.solve(problem.X);
    Eigen::MatrixXd M = T;
    if (xi != 0.0) {
        Eigen::MatrixXd refit = llt.solve(problem.X * (problem.X.transpose() * T));
        M = xi * refit + (1.0 - xi) * T;
    }
    const Eigen::VectorXd bias = M * (problem.X.transpose() * problem.theta_star) - problem.theta_star;

    CounterRng eng(problem.seed, 0);
    std::normal_distribution<double> eta_dist(0.0, problem.gamma > 0.0 ? problem.gamma : 1.0);
    Eigen::VectorXd eta(n);
    Eigen::VectorXd err(d);
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
        if (problem.gamma > 0.0) {
            for (Eigen::Index i = 0; i < n; ++i) eta[i] = eta_dist(eng);
            err.noalias() = M * eta;
            err += bias;
        } else {
            err = bias;
        }
        const double x = err.squaredNorm();
        const double delta = x - mean;
        mean += delta / static_cast<double>(k + 1);
        m2 += delta * (x - mean);
    }
    const double var = m2 / static_cast<double>(draws - 1);
    return {mean, std::sqrt(var / static_cast<double>(draws))};
}

}  // namespace sdlab
