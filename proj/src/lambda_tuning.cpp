#include "sdlab/lambda_tuning.hpp"

#include "sdlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace sdlab {

namespace {

constexpr int kMaxIter = 200;
constexpr double kGradTol = 1e-12;
constexpr double kDamping = 0.5;

void require_lambda(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw InvalidInput("lambda must be positive and finite");
}

void require_inputs(const SpectralDesign& design, const NoiseSpec& noise, double lambda) {
    require_lambda(lambda);
    design.validate();
    noise.validate();
}

double sq(double x) { return x * x; }

struct Objective {
    std::function<double(double)> f;
    std::function<double(double)> df;
    std::function<double(double)> d2f;  // may be empty
    double grad_tol = kGradTol;         // 0: stop on bracket collapse only
};

double second_by_difference(const std::function<double(double)>& df, double x) {
    const double h = 1e-5 * x;
    return (df(x + h) - df(x - h)) / (2.0 * h);
}

LambdaMinimum golden_section(const Objective& obj, double a, double b) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = obj.f(c);
    double fd = obj.f(d);
    std::size_t it = 0;
    for (; it < static_cast<std::size_t>(kMaxIter) && (b - a) > 1e-14 * b; ++it) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = obj.f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = obj.f(d);
        }
    }
    const double x = fc <= fd ? c : d;
    return {x, obj.f(x), true, it};
}

// Root of df in [a, b] with df(a) < 0 < df(b). Newton steps from x0, kept
// inside the bracket; bisection when a step escapes. Stops on a small
// gradient or on bracket collapse (needed for higher-order roots).
LambdaMinimum refine(const Objective& obj, double a, double b, double x0) {
    double x = x0;
    std::size_t it = 0;
    double checkpoint = b - a;
    int newton_run = 0;
    for (; it < static_cast<std::size_t>(kMaxIter); ++it) {
        const double g = obj.df(x);
        if (g == 0.0 || std::abs(g) <= obj.grad_tol * (1.0 + std::abs(obj.f(x)))) break;
        if (g < 0.0) a = x; else b = x;
        if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * b) break;

        // Bisect when two Newton steps in a row did not halve the bracket.
        bool force_bisect = false;
        if (newton_run >= 2) {
            force_bisect = b - a > 0.5 * checkpoint;
            checkpoint = b - a;
            newton_run = 0;
        }
        double next = 0.5 * (a + b);
        const double curv = force_bisect ? 0.0
                            : obj.d2f    ? obj.d2f(x)
                                         : second_by_difference(obj.df, x);
        if (!force_bisect && curv > 0.0 && std::isfinite(curv)) {
            const double step = g / curv;
            double cand = x - step;
            if (cand > a && cand < b && std::abs(obj.df(cand)) >= std::abs(g))
                cand = x - kDamping * step;
            if (cand > a && cand < b) next = cand;
        }
        if (next == x) next = 0.5 * (a + b);
        if (next == 0.5 * (a + b)) {
            newton_run = 0;
            checkpoint = b - a;
        } else {
            ++newton_run;
        }
        x = next;
    }
    return {x, obj.f(x), true, it};
}

LambdaMinimum minimize_scan(const Objective& obj, const LambdaBracket& br, std::size_t points,
                            bool allow_boundary) {
    if (!(br.lo > 0.0) || !(br.hi > br.lo)) throw InvalidInput("invalid lambda bracket");
    std::vector<double> grid(points);
    const double ratio = std::log(br.hi / br.lo);
    for (std::size_t i = 0; i < points; ++i)
        grid[i] = br.lo * std::exp(ratio * static_cast<double>(i) / static_cast<double>(points - 1));
    grid.front() = br.lo;
    grid.back() = br.hi;

    std::size_t best = 0;
    double best_val = obj.f(grid[0]);
    for (std::size_t i = 1; i < points; ++i) {
        const double v = obj.f(grid[i]);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    if (best == 0 || best + 1 == points) {
        if (allow_boundary) return {grid[best], best_val, false, 0};
        throw BracketingError("error curve is minimized at the edge of the lambda bracket");
    }
    const double a = grid[best - 1];
    const double b = grid[best + 1];
    if (obj.df(a) < 0.0 && obj.df(b) > 0.0) return refine(obj, a, b, grid[best]);
    return golden_section(obj, a, b);
}

}  // namespace

double xi_star(const SpectralDesign& design, const NoiseSpec& noise, double lambda) {
    require_inputs(design, noise, lambda);
    const double g_over_l = noise.gamma_sq / lambda;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < design.rank(); ++j) {
        const double c = lambda / sq(design.sigma[j]);
        const double op = 1.0 + c;
        const double th = design.theta(j);
        num += (g_over_l - th) * c * c / (op * op * op);
        den += (g_over_l * c + th) * c * c / (op * op * op * op);
    }
    if (!(den > 0.0)) throw DegenerateDesign("xi_star denominator vanishes (no signal, no noise)");
    return num / den;
}

double xi_star_gamma_limit(const SpectralDesign& design, double lambda) {
    require_lambda(lambda);
    design.validate();
    double num = 0.0;
    double den = 0.0;
    for (double sigma : design.sigma) {
        const double c = lambda / sq(sigma);
        const double op = 1.0 + c;
        num += c * c / (op * op * op);
        den += c * c * c / (op * op * op * op);
    }
    if (!(den > 0.0)) throw DegenerateDesign("empty spectrum");
    return num / den;
}

double e_reg(const SpectralDesign& design, const NoiseSpec& noise, double lambda) {
    require_inputs(design, noise, lambda);
    double total = design.null_mass;
    for (std::size_t j = 0; j < design.rank(); ++j) {
        const double s2 = sq(design.sigma[j]);
        const double den = sq(lambda + s2);
        total += (lambda * lambda * design.theta(j) + noise.gamma_sq * s2) / den;
    }
    return total;
}

// Written in c_j = lambda / sigma_j^2 so that it shares no algebra with g_half_slope.
double e_reg_prime(const SpectralDesign& design, const NoiseSpec& noise, double lambda) {
    require_inputs(design, noise, lambda);
    double total = 0.0;
    for (std::size_t j = 0; j < design.rank(); ++j) {
        const double s2 = sq(design.sigma[j]);
        const double c = lambda / s2;
        const double op3 = (1.0 + c) * (1.0 + c) * (1.0 + c);
        total += 2.0 * design.theta(j) * c / (s2 * op3) - 2.0 * noise.gamma_sq / (s2 * s2 * op3);
    }
    return total;
}

double g_half_slope(const SpectralDesign& design, const NoiseSpec& noise, double lambda) {
    require_inputs(design, noise, lambda);
    double total = 0.0;
    for (std::size_t j = 0; j < design.rank(); ++j) {
        const double s2 = sq(design.sigma[j]);
        const double b = lambda + s2;
        total += (lambda * design.theta(j) - noise.gamma_sq) * s2 / (b * b * b);
    }
    return total;
}

double e_reg_second(const SpectralDesign& design, const NoiseSpec& noise, double lambda) {
    require_inputs(design, noise, lambda);
    double total = 0.0;
    for (std::size_t j = 0; j < design.rank(); ++j) {
        const double s2 = sq(design.sigma[j]);
        const double th = design.theta(j);
        const double b2 = sq(lambda + s2);
        total += 2.0 * s2 * (th * s2 + 3.0 * noise.gamma_sq - 2.0 * lambda * th) / (b2 * b2);
    }
    return total;
}

double h_curvature(const SpectralDesign& design, const NoiseSpec& noise, double lambda) {
    require_inputs(design, noise, lambda);
    double total = 0.0;
    for (std::size_t j = 0; j < design.rank(); ++j) {
        const double s2 = sq(design.sigma[j]);
        const double b2 = sq(lambda + s2);
        total += (noise.gamma_sq * s2 + design.theta(j) * s2 * s2) / (b2 * b2);
    }
    return 4.0 * total;
}

double h_curvature_prime(const SpectralDesign& design, const NoiseSpec& noise, double lambda) {
    require_inputs(design, noise, lambda);
    double total = 0.0;
    for (std::size_t j = 0; j < design.rank(); ++j) {
        const double s2 = sq(design.sigma[j]);
        const double b = lambda + s2;
        const double b2 = b * b;
        total += (noise.gamma_sq * s2 + design.theta(j) * s2 * s2) / (b2 * b2 * b);
    }
    return -16.0 * total;
}

double e_sd(const SpectralDesign& design, const NoiseSpec& noise, double lambda) {
    const double h = h_curvature(design, noise, lambda);
    if (!(h > 0.0)) throw DegenerateDesign("h(lambda) vanishes (no signal, no noise)");
    const double d1 = e_reg_prime(design, noise, lambda);
    return e_reg(design, noise, lambda) - d1 * d1 / h;
}

// Same formula as the double-precision pieces, summed in long double: near a
// multiple root the bracketed factor loses most of its digits to cancellation.
double e_sd_prime(const SpectralDesign& design, const NoiseSpec& noise, double lambda) {
    require_inputs(design, noise, lambda);
    using ld = long double;
    const ld lam = lambda;
    const ld g2 = noise.gamma_sq;
    ld d1 = 0, d2 = 0, h = 0, hp = 0;
    for (std::size_t j = 0; j < design.rank(); ++j) {
        const ld s2 = static_cast<ld>(design.sigma[j]) * design.sigma[j];
        const ld th = static_cast<ld>(design.s[j]) * design.s[j];
        const ld b = lam + s2;
        const ld b3 = b * b * b;
        const ld b4 = b3 * b;
        const ld w = g2 * s2 + th * s2 * s2;
        d1 += 2 * (lam * th - g2) * s2 / b3;
        d2 += 2 * s2 * (th * s2 + 3 * g2 - 2 * lam * th) / b4;
        h += 4 * w / b4;
        hp += -16 * w / (b4 * b);
    }
    if (!(h > 0)) throw DegenerateDesign("h(lambda) vanishes (no signal, no noise)");
    return static_cast<double>(d1 * (1 - 2 * d2 / h + d1 * hp / (h * h)));
}

LocalMaxResult local_max_condition(const SpectralDesign& design, double lambda_star) {
    require_lambda(lambda_star);
    design.validate();
    const std::size_t r = design.rank();
    std::vector<double> w(r);
    for (std::size_t j = 0; j < r; ++j) {
        const double s2 = sq(design.sigma[j]);
        w[j] = std::pow(lambda_star + s2, 4);
    }
    double t3 = 0.0;
    for (std::size_t k = 0; k < r; ++k) {
        const double sk = sq(design.sigma[k]);
        for (std::size_t j = 0; j < k; ++j) {
            const double sj = sq(design.sigma[j]);
            t3 += sj * sk * (sj - sk) * (design.theta(k) - design.theta(j)) / (w[j] * w[k]);
        }
    }
    return {t3, t3 < 0.0};
}

bool theorem8_check(const SpectralDesign& design, const NoiseSpec& noise, std::size_t q,
                    double nu) {
    design.validate();
    const std::size_t r = design.rank();
    if (r == 0) throw InvalidInput("empty spectrum");
    if (q < 1 || q > r) throw InvalidInput("q must lie in [1, r]");
    if (!(nu > 1.0)) throw InvalidInput("nu must exceed 1");
    double norm2 = design.null_mass;
    for (std::size_t j = 0; j < r; ++j) norm2 += design.theta(j);
    if (std::abs(norm2 - 1.0) > 1e-9) throw InvalidInput("theorem8_check needs ||theta*|| = 1");
    if (std::abs(design.sigma[0] - 1.0) > 1e-12) throw InvalidInput("theorem8_check needs sigma_1 = 1");

    for (std::size_t k = 1; k < q; ++k)
        if (!(design.theta(k - 1) > design.theta(k))) return false;
    if (q == 1) return false;

    double min_term = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < q; ++k) {
        const double s2 = sq(design.sigma[k]);
        min_term = std::min(min_term, s2 * (1.0 - s2) * (design.theta(0) - design.theta(k)));
    }
    if (!(min_term > 0.0)) return false;

    double delta = 0.0;
    for (std::size_t j = q; j < r; ++j) delta = std::max(delta, design.sigma[j]);
    const double bound = std::sqrt(min_term / (2.0 * nu * static_cast<double>(r)));
    if (delta > bound) return false;

    double theta_max = 0.0;
    for (std::size_t j = 0; j < r; ++j) theta_max = std::max(theta_max, design.theta(j));
    return noise.gamma_sq >= theta_max / (nu - 1.0);
}

LambdaBracket default_bracket(const SpectralDesign& design) {
    if (design.rank() == 0) throw InvalidInput("empty spectrum");
    return {1e-6 * sq(design.sigma.back()), 1e3 * sq(design.sigma.front())};
}

LambdaMinimum minimize_e_reg(const SpectralDesign& design, const NoiseSpec& noise,
                             const MinimizeOptions& opt) {
    design.validate();
    Objective obj{[&](double l) { return e_reg(design, noise, l); },
                  [&](double l) { return e_reg_prime(design, noise, l); },
                  [&](double l) { return e_reg_second(design, noise, l); }};
    return minimize_scan(obj, opt.bracket.value_or(default_bracket(design)), 64,
                         opt.allow_boundary);
}

LambdaMinimum minimize_e_sd(const SpectralDesign& design, const NoiseSpec& noise,
                            const MinimizeOptions& opt) {
    design.validate();
    Objective obj{[&](double l) { return e_sd(design, noise, l); },
                  [&](double l) { return e_sd_prime(design, noise, l); },
                  {},
                  0.0};
    return minimize_scan(obj, opt.bracket.value_or(default_bracket(design)), 256,
                         opt.allow_boundary);
}

SpectralDesign figure0_design() {
    SpectralDesign d;
    d.d = 100;
    for (std::size_t j = 1; j <= 100; ++j) {
        d.sigma.push_back(1.0 / static_cast<double>(j));
        d.s.push_back(j <= 2 ? 1.0 / std::sqrt(2.0) : 0.0);
    }
    return d;
}

SpectralDesign theorem5_design() {
    SpectralDesign d;
    d.d = 2;
    d.sigma = {1.0, 0.5};
    d.s = {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
    return d;
}

std::vector<double> figure0_lambdas(double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("gamma must be positive");
    std::vector<double> out;
    for (int i = 1; i <= 10; ++i) out.push_back(std::ldexp(gamma * gamma, i - 3));
    return out;
}

std::vector<CurveRecord> curve(const SpectralDesign& design, const NoiseSpec& noise,
                               const std::vector<double>& lambdas) {
    std::vector<CurveRecord> out;
    out.reserve(lambdas.size());
    for (double l : lambdas)
        out.push_back({l, e_reg(design, noise, l), e_sd(design, noise, l),
                       xi_star(design, noise, l), e_sd_prime(design, noise, l)});
    return out;
}

std::vector<CurveRecord> figure0_sweep(double gamma) {
    return curve(figure0_design(), NoiseSpec{gamma * gamma}, figure0_lambdas(gamma));
}

}  // namespace sdlab
