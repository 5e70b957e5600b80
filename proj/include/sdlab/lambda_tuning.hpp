#pragma once

#include "sdlab/spectral_ridge.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace sdlab {

struct CurveRecord {
    double lambda = 0.0;
    double e_reg = 0.0;
    double e_sd = 0.0;
    double xi_star = 0.0;
    double e_sd_prime = 0.0;
};

struct LocalMaxResult {
    double t3 = 0.0;
    bool is_local_max = false;
};

struct LambdaBracket {
    double lo = 0.0;
    double hi = 0.0;
};

struct MinimizeOptions {
    std::optional<LambdaBracket> bracket;  // default_bracket(design) when empty
    /// Accept a minimizer on the bracket edge instead of raising BracketingError.
    bool allow_boundary = false;
};

struct LambdaMinimum {
    double lambda = 0.0;
    double value = 0.0;
    bool interior = true;
    std::size_t iterations = 0;
};

/// Optimal imitation parameter at a fixed lambda.
double xi_star(const SpectralDesign& design, const NoiseSpec& noise, double lambda);
/// Limit of xi_star as gamma^2 grows without bound.
double xi_star_gamma_limit(const SpectralDesign& design, double lambda);

double e_reg(const SpectralDesign& design, const NoiseSpec& noise, double lambda);
double e_reg_prime(const SpectralDesign& design, const NoiseSpec& noise, double lambda);
double e_reg_second(const SpectralDesign& design, const NoiseSpec& noise, double lambda);
/// g(lambda) = sum_j (lambda theta_j - gamma^2) sigma_j^2 / (lambda + sigma_j^2)^3.
double g_half_slope(const SpectralDesign& design, const NoiseSpec& noise, double lambda);

double h_curvature(const SpectralDesign& design, const NoiseSpec& noise, double lambda);
double h_curvature_prime(const SpectralDesign& design, const NoiseSpec& noise, double lambda);

double e_sd(const SpectralDesign& design, const NoiseSpec& noise, double lambda);
double e_sd_prime(const SpectralDesign& design, const NoiseSpec& noise, double lambda);

LocalMaxResult local_max_condition(const SpectralDesign& design, double lambda_star);

/// Sufficient condition for lambda*_reg to be a local maximum of e_sd.
/// Needs ||theta*|| = 1 and sigma_1 = 1. The min over k runs over 2..q
/// (k = 1 always gives 0), so q = 1 yields false.
bool theorem8_check(const SpectralDesign& design, const NoiseSpec& noise, std::size_t q,
                    double nu);

/// [1e-6 sigma_r^2, 1e3 sigma_1^2].
LambdaBracket default_bracket(const SpectralDesign& design);

LambdaMinimum minimize_e_reg(const SpectralDesign& design, const NoiseSpec& noise,
                             const MinimizeOptions& opt = {});
LambdaMinimum minimize_e_sd(const SpectralDesign& design, const NoiseSpec& noise,
                            const MinimizeOptions& opt = {});

/// d = r = 100, sigma_j = 1/j, theta* = (u_1 + u_2)/sqrt(2).
SpectralDesign figure0_design();
/// sigma = (1, 1/2), theta*_j = 1/2, d = r = 2.
SpectralDesign theorem5_design();
/// lambda_i = 2^(i-3) gamma^2 for i = 1..10.
std::vector<double> figure0_lambdas(double gamma);
std::vector<CurveRecord> figure0_sweep(double gamma);
std::vector<CurveRecord> curve(const SpectralDesign& design, const NoiseSpec& noise,
                               const std::vector<double>& lambdas);

}  // namespace sdlab
