#include "sdlab/logit_fixedpoint.hpp"

#include "sdlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace sdlab {

namespace {

constexpr double kTol = 1e-12;
constexpr int kNewtonIter = 200;
constexpr int kHalvings = 60;

// Two equations in (x, xh) sharing S = cn((1-p) x - p xh):
//   F1 = sigmoid(S - (1-c) xh) - lh (xh + Ah)
//   F2 = sigmoid(S + (1-c) x) - 1 + lh (x + A)
// The teacher has A = Ah = 0; the student uses A = alpha, Ah = alpha_hat.
struct PairSystem {
    double cn;
    double p;
    double omc;
    double lh;
    double A;
    double Ah;

    double S(double x, double xh) const { return cn * ((1.0 - p) * x - p * xh); }

    std::array<double, 2> eval(double x, double xh) const {
        const double s = S(x, xh);
        return {sigmoid(s - omc * xh) - lh * (xh + Ah), sigmoid(s + omc * x) - 1.0 + lh * (x + A)};
    }

    static double norm(const std::array<double, 2>& f) {
        return std::max(std::abs(f[0]), std::abs(f[1]));
    }

    // Newton with step halving. Returns the final max-norm defect.
    double newton(double& x, double& xh, int& iters) const {
        auto f = eval(x, xh);
        double fn = norm(f);
        for (int it = 0; it < kNewtonIter && std::isfinite(fn); ++it, ++iters) {
            if (fn <= 1e-15) break;
            const double s = S(x, xh);
            const double g1 = sigmoid(s - omc * xh);
            const double g2 = sigmoid(s + omc * x);
            const double d1 = g1 * (1.0 - g1);
            const double d2 = g2 * (1.0 - g2);
            const double j11 = d1 * cn * (1.0 - p);
            const double j12 = -d1 * (cn * p + omc) - lh;
            const double j21 = d2 * (cn * (1.0 - p) + omc) + lh;
            const double j22 = -d2 * cn * p;
            const double det = j11 * j22 - j12 * j21;
            if (!(std::abs(det) > 0.0) || !std::isfinite(det)) break;
            const double dx = -(j22 * f[0] - j12 * f[1]) / det;
            const double dxh = -(-j21 * f[0] + j11 * f[1]) / det;

            double t = 1.0;
            bool moved = false;
            for (int h = 0; h <= kHalvings; ++h, t *= 0.5) {
                const double nx = x + t * dx;
                const double nxh = xh + t * dxh;
                const auto nf = eval(nx, nxh);
                const double nfn = norm(nf);
                if (std::isfinite(nfn) && nfn < fn) {
                    x = nx;
                    xh = nxh;
                    f = nf;
                    fn = nfn;
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
        }
        return fn;
    }

    static double bisect(const std::function<double(double)>& g, double lo, double hi) {
        // g(lo) > 0 > g(hi)
        for (int it = 0; it < 400; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (g(mid) > 0.0) lo = mid; else hi = mid;
        }
        return 0.5 * (lo + hi);
    }

    // Each equation has a unique root for fixed S, and
    // G(S) = cn((1-p) x(S) - p xh(S)) - S is strictly decreasing.
    void nested_bisection(double& x, double& xh) const {
        const double width = 1.0 / lh;
        auto xh_of = [&](double s) {
            return bisect([&](double v) { return sigmoid(s - omc * v) - lh * (v + Ah); }, -Ah,
                          width - Ah);
        };
        auto x_of = [&](double s) {
            return bisect([&](double v) { return 1.0 - lh * (v + A) - sigmoid(s + omc * v); }, -A,
                          width - A);
        };
        const double bound = cn * (width + std::abs(A) + std::abs(Ah)) + 1.0;
        const double s = bisect(
            [&](double s) { return cn * ((1.0 - p) * x_of(s) - p * xh_of(s)) - s; }, -bound,
            bound);
        x = x_of(s);
        xh = xh_of(s);
    }

    std::array<double, 2> solve(double& x, double& xh) const {
        int iters = 0;
        double x0 = x;
        double xh0 = xh;
        double fn = newton(x, xh, iters);
        if (!(fn <= kTol)) {
            x = x0;
            xh = xh0;
            nested_bisection(x, xh);
            fn = newton(x, xh, iters);
        }
        auto f = eval(x, xh);
        if (!(norm(f) <= kTol) || !std::isfinite(x) || !std::isfinite(xh))
            throw SolverError("sigmoid fixed-point system did not converge", norm(f));
        return f;
    }
};

PairSystem system_for(const CorruptionSetting& s, double A, double Ah) {
    return {s.c * static_cast<double>(s.n), s.p, 1.0 - s.c, s.lambda_hat, A, Ah};
}

void require_open_unit(double v) {
    if (!(v > 0.0 && v < 1.0)) throw InconsistentSolution("prediction outside (0, 1)");
}

}  // namespace

void CorruptionSetting::validate() const {
    if (n < 1) throw InvalidInput("n must be positive");
    if (!(p >= 0.0 && p < 0.5)) throw InvalidInput("p must lie in [0, 0.5)");
    if (!(c > 0.0 && c < 1.0)) throw InvalidInput("c must lie in (0, 1)");
    if (!(lambda_hat > 0.0) || !std::isfinite(lambda_hat))
        throw InvalidInput("lambda_hat must be positive");
}

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double maclaurin_eps(double z) noexcept { return sigmoid(z) - 0.5 - 0.25 * z; }

std::array<double, 2> teacher_residual(const CorruptionSetting& setting, double alpha,
                                       double alpha_hat) {
    return system_for(setting, 0.0, 0.0).eval(alpha, alpha_hat);
}

std::array<double, 2> student_residual(const CorruptionSetting& setting,
                                       const TeacherDual& teacher, double beta,
                                       double beta_hat) {
    return system_for(setting, teacher.alpha, teacher.alpha_hat).eval(beta, beta_hat);
}

TeacherDual solve_teacher(const CorruptionSetting& setting) {
    setting.validate();
    const double scale = setting.lambda_hat + (1.0 - setting.c) / 4.0;
    TeacherDual out;
    out.alpha = 1.02 * setting.p / scale;
    out.alpha_hat = 1.02 * (1.0 - setting.p) / scale;
    out.residual = system_for(setting, 0.0, 0.0).solve(out.alpha, out.alpha_hat);
    return out;
}

StudentDual solve_student(const CorruptionSetting& setting, const TeacherDual& teacher) {
    setting.validate();
    const auto guess = closed_form_student(setting, 0.02, 0.0);
    StudentDual out;
    out.beta = guess.good0 / setting.lambda_hat - teacher.alpha;
    out.beta_hat = guess.bad1 / setting.lambda_hat - teacher.alpha_hat;
    out.residual =
        system_for(setting, teacher.alpha, teacher.alpha_hat).solve(out.beta, out.beta_hat);
    return out;
}

PredictionProfile teacher_predictions(const TeacherDual& dual, const CorruptionSetting& setting) {
    const double lh = setting.lambda_hat;
    PredictionProfile out{lh * dual.alpha_hat, 1.0 - lh * dual.alpha, 1.0 - lh * dual.alpha_hat,
                          lh * dual.alpha};
    require_open_unit(out.bad1);
    require_open_unit(out.good1);
    return out;
}

PredictionProfile student_predictions(const StudentDual& student, const TeacherDual& teacher,
                                      const CorruptionSetting& setting) {
    const double lh = setting.lambda_hat;
    const double bad = lh * (teacher.alpha_hat + student.beta_hat);
    const double good = lh * (teacher.alpha + student.beta);
    PredictionProfile out{bad, 1.0 - good, 1.0 - bad, good};
    require_open_unit(out.bad1);
    require_open_unit(out.good1);
    return out;
}

PredictionProfile closed_form_teacher(const CorruptionSetting& setting, double zeta) {
    const double r = setting.r();
    const double bad = (1.0 - setting.p) * (1.0 + zeta) / (1.0 + r);
    const double good = setting.p * (1.0 + zeta) / (1.0 + r);
    return {bad, 1.0 - good, 1.0 - bad, good};
}

PredictionProfile closed_form_student(const CorruptionSetting& setting, double zeta,
                                      double zeta_prime) {
    const double r = setting.r();
    const double k = (r * (1.0 + zeta) / (1.0 + r) + 1.0 + zeta_prime) / (1.0 + r);
    const double bad = (1.0 - setting.p) * k;
    const double good = setting.p * k;
    return {bad, 1.0 - good, 1.0 - bad, good};
}

double group_accuracy(const PredictionProfile& profile, double p) {
    auto hit = [](bool b) { return b ? 1.0 : 0.0; };
    const double class1 = p * hit(profile.bad1 > 0.5) + (1.0 - p) * hit(profile.good1 > 0.5);
    const double class0 = p * hit(!(profile.bad0 > 0.5)) + (1.0 - p) * hit(!(profile.good0 > 0.5));
    return 0.5 * (class1 + class0);
}

PInterval thm1_p_interval(double r) {
    PInterval out;
    out.lo = std::max((1.08 - r) / 2.08, (1.0 + r) / 3.7);
    out.hi = 1.0 - 0.51 * (1.0 + r) * (1.0 + r) / (1.0 + 2.0 * r);
    out.empty = !(out.lo < out.hi);
    return out;
}

Variability variability(const PredictionProfile& teacher, const PredictionProfile& student) {
    return {std::abs(teacher.good1 - teacher.bad1), std::abs(student.good1 - student.bad1)};
}

Variability variability_from_duals(const TeacherDual& teacher, const StudentDual& student,
                                   const CorruptionSetting& setting) {
    const double lh = setting.lambda_hat;
    return {1.0 - lh * (teacher.alpha + teacher.alpha_hat),
            1.0 - lh * (teacher.alpha + student.beta + teacher.alpha_hat + student.beta_hat)};
}

MaclaurinResiduals maclaurin_residuals(const TeacherDual& teacher, const StudentDual& student,
                                       const CorruptionSetting& setting) {
    const auto ts = system_for(setting, 0.0, 0.0);
    const double s = ts.S(teacher.alpha, teacher.alpha_hat);
    const double t = ts.S(student.beta, student.beta_hat);
    const double omc = 1.0 - setting.c;
    const double e1 = maclaurin_eps(s - omc * teacher.alpha_hat);
    const double e2 = maclaurin_eps(-(s + omc * teacher.alpha));
    const double e3 = maclaurin_eps(t - omc * student.beta_hat);
    const double e4 = maclaurin_eps(-(t + omc * student.beta));
    return {e1 + e2, e3 + e4};
}

}  // namespace sdlab
