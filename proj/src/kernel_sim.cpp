#include "sdlab/kernel_sim.hpp"

#include "sdlab/error.hpp"
#include "sdlab/logit_fixedpoint.hpp"
#include "sdlab/rng.hpp"

#include <algorithm>
#include <cmath>

namespace sdlab {

namespace {

constexpr std::uint64_t kStreamZ1 = 1;
constexpr std::uint64_t kStreamZ0 = 2;

RowMajorMatrix draw_factor(const GramSpec& spec, std::uint64_t stream) {
    const Eigen::Index n = static_cast<Eigen::Index>(spec.n);
    CounterRng rng(spec.seed, stream);
    RowMajorMatrix Z(n, n);
    double* data = Z.data();
    const std::uint64_t total = spec.n * spec.n;
    if (spec.dist == GramDist::Uniform01) {
        for (std::uint64_t k = 0; k < total; ++k) data[k] = rng.uniform(k);
    } else {
        for (std::uint64_t k = 0; k < total; ++k) data[k] = rng.uniform(k) < spec.q ? 1.0 : 0.0;
    }
    return Z;
}

Eigen::VectorXd sigmoid_of(const Eigen::VectorXd& v) {
    Eigen::VectorXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
    return out;
}

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Conjugate gradients on (diag(w) + K) x = b; diag(w) + K is SPD.
Eigen::VectorXd cg_solve(const MatVec& K, const Eigen::VectorXd& w, const Eigen::VectorXd& b,
                         double rel_tol, std::size_t max_iter, std::size_t& matvecs) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
    Eigen::VectorXd r = b;
    Eigen::VectorXd z = r.cwiseQuotient(w);  // Jacobi preconditioner
    Eigen::VectorXd d = z;
    Eigen::VectorXd Kd(b.size());
    double rz = r.dot(z);
    const double stop = rel_tol * b.norm();
    for (std::size_t it = 0; it < max_iter && r.norm() > stop; ++it) {
        K(d, Kd);
        ++matvecs;
        Kd += w.cwiseProduct(d);
        const double alpha = rz / d.dot(Kd);
        x += alpha * d;
        r -= alpha * Kd;
        z = r.cwiseQuotient(w);
        const double rz_next = r.dot(z);
        d = z + (rz_next / rz) * d;
        rz = rz_next;
    }
    return x;
}

KernelModel fit_newton_cg(const MatVec& K, const Eigen::VectorXd& t, double lh,
                          const FitOptions& opt, Eigen::VectorXd a) {
    const Eigen::Index m = t.size();
    Eigen::VectorXd v(m);
    Eigen::VectorXd Kd(m);
    K(a, v);
    Eigen::VectorXd s = sigmoid_of(v);
    Eigen::VectorXd G = lh * a - t + s;
    double gn = G.norm();
    std::size_t matvecs = 1;
    std::size_t it = 0;
    for (; it < 100 && max_abs(G) > opt.tol; ++it) {
        Eigen::VectorXd D = s.cwiseProduct(Eigen::VectorXd::Ones(m) - s);
        D = D.cwiseMax(1e-300);
        // (lh I + D K) d = -G  <=>  (lh D^{-1} + K) d = -D^{-1} G
        Eigen::VectorXd w = lh * D.cwiseInverse();
        Eigen::VectorXd rhs = -G.cwiseQuotient(D);
        Eigen::VectorXd d = cg_solve(K, w, rhs, 1e-12, 500, matvecs);
        K(d, Kd);
        ++matvecs;

        double step = 1.0;
        bool accepted = false;
        for (int h = 0; h < 60; ++h, step *= 0.5) {
            Eigen::VectorXd a_new = a + step * d;
            Eigen::VectorXd v_new = v + step * Kd;
            Eigen::VectorXd s_new = sigmoid_of(v_new);
            Eigen::VectorXd G_new = lh * a_new - t + s_new;
            const double gn_new = G_new.norm();
            if (gn_new < gn) {
                a = std::move(a_new);
                v = std::move(v_new);
                s = std::move(s_new);
                G = std::move(G_new);
                gn = gn_new;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        // refresh v from a to stop drift from the incremental update
        K(a, v);
        ++matvecs;
        s = sigmoid_of(v);
        G = lh * a - t + s;
        gn = G.norm();
    }
    KernelModel out;
    out.dual = std::move(a);
    out.targets = t;
    out.predictions = std::move(s);
    out.residual = max_abs(G);
    out.iterations = it;
    return out;
}

// Objective whose gradient is K (lh a + sigmoid(K a) - t); v = K a.
double dual_objective(const Eigen::VectorXd& a, const Eigen::VectorXd& v, const Eigen::VectorXd& t,
                      double lh) {
    double soft = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        soft += v[i] > 0.0 ? v[i] + std::log1p(std::exp(-v[i])) : std::log1p(std::exp(v[i]));
    return 0.5 * lh * a.dot(v) + soft - t.dot(v);
}

// The damped update is a descent step on dual_objective, so omega is halved
// whenever neither that objective nor the residual improves.
KernelModel fit_fixed_point(const MatVec& K, const Eigen::VectorXd& t, double lh,
                            const FitOptions& opt, Eigen::VectorXd a) {
    const Eigen::Index m = t.size();
    Eigen::VectorXd v(m);
    K(a, v);
    Eigen::VectorXd s = sigmoid_of(v);
    double res = max_abs(lh * a - t + s);
    double obj = dual_objective(a, v, t, lh);
    double omega = 0.5;
    std::size_t it = 0;
    for (; it < opt.max_iter && res > opt.tol; ++it) {
        Eigen::VectorXd a_new = (1.0 - omega) * a + omega * (t - s) / lh;
        Eigen::VectorXd v_new(m);
        K(a_new, v_new);
        Eigen::VectorXd s_new = sigmoid_of(v_new);
        const double res_new = max_abs(lh * a_new - t + s_new);
        const double obj_new = dual_objective(a_new, v_new, t, lh);
        if (!(obj_new <= obj) && !(res_new < res)) {
            omega *= 0.5;
            if (omega < 1e-12) break;
            continue;
        }
        a = std::move(a_new);
        v = std::move(v_new);
        s = std::move(s_new);
        res = res_new;
        obj = obj_new;
    }
    KernelModel out;
    out.dual = std::move(a);
    out.targets = t;
    out.predictions = std::move(s);
    out.residual = res;
    out.iterations = it;
    return out;
}

double group_mean(const Eigen::VectorXd& v, std::size_t lo, std::size_t hi) {
    if (hi <= lo) return 0.0;
    return v.segment(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo)).mean();
}

}  // namespace

double GramSpec::nominal_c(GramDist dist, double q) {
    return dist == GramDist::Uniform01 ? 0.25 : q * q;
}

void GramSpec::validate() const {
    if (n < 2) throw InvalidInput("n must be at least 2");
    if (!(p >= 0.0 && p < 0.5)) throw InvalidInput("p must lie in [0, 0.5)");
    if (dist == GramDist::Bernoulli && !(q > 0.0 && q < 1.0))
        throw InvalidInput("Bernoulli q must lie in (0, 1)");
    if (!(lambda_hat > 0.0) || !std::isfinite(lambda_hat))
        throw InvalidInput("lambda_hat must be positive");
    if (std::abs(c_nominal - nominal_c(dist, q)) > 1e-12)
        throw InvalidInput("c_nominal does not match the factor distribution");
}

BlockKernel::BlockKernel(RowMajorMatrix Z) : Z_(std::move(Z)) {
    const double n = static_cast<double>(Z_.rows());
    shift_ = Eigen::VectorXd::Ones(Z_.rows()) - Z_.rowwise().squaredNorm() / n;
}

void BlockKernel::apply(const Eigen::VectorXd& v, Eigen::VectorXd& out) const {
    const double n = static_cast<double>(Z_.rows());
    Eigen::VectorXd u = Z_.transpose() * v;
    out.noalias() = Z_ * u;
    out /= n;
    out += shift_.cwiseProduct(v);
}

double BlockKernel::mean_offdiag() const {
    const double n = static_cast<double>(Z_.rows());
    const Eigen::VectorXd colsum = Z_.colwise().sum().transpose();
    const double total = colsum.squaredNorm() / n;  // 1^T Z Z^T 1 / n
    const double diag = Z_.rowwise().squaredNorm().sum() / n;
    return (total - diag) / (n * (n - 1.0));
}

GramFactors build_factors(const GramSpec& spec) {
    spec.validate();
    GramFactors out{spec.n, BlockKernel(draw_factor(spec, kStreamZ1)),
                    BlockKernel(draw_factor(spec, kStreamZ0)), {}, {}, 0};
    const std::size_t n = spec.n;
    out.flipped = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.p + 1e-9));
    out.labels.resize(2 * n);
    out.true_labels.resize(2 * n);
    for (std::size_t i = 0; i < 2 * n; ++i) {
        const int truth = i < n ? 1 : 0;
        const std::size_t within = i < n ? i : i - n;
        out.true_labels[i] = truth;
        out.labels[i] = within < out.flipped ? 1 - truth : truth;
    }
    return out;
}

double stationarity_residual(const MatVec& K, const Eigen::VectorXd& a,
                             const Eigen::VectorXd& targets, double lambda_hat) {
    Eigen::VectorXd v(a.size());
    K(a, v);
    return max_abs(lambda_hat * a - targets + sigmoid_of(v));
}

KernelModel fit_dual(const MatVec& K, const Eigen::VectorXd& targets, double lambda_hat,
                     const FitOptions& opt, const Eigen::VectorXd* warm_start) {
    if (!(lambda_hat > 0.0)) throw InvalidInput("lambda_hat must be positive");
    for (Eigen::Index i = 0; i < targets.size(); ++i)
        if (!(targets[i] >= 0.0 && targets[i] <= 1.0)) throw InvalidInput("targets must lie in [0, 1]");
    Eigen::VectorXd a0 = Eigen::VectorXd::Zero(targets.size());
    if (warm_start) {
        if (warm_start->size() != targets.size()) throw InvalidInput("warm start length mismatch");
        a0 = *warm_start;
    }
    KernelModel out = opt.method == FitMethod::NewtonCG
                          ? fit_newton_cg(K, targets, lambda_hat, opt, a0)
                          : fit_fixed_point(K, targets, lambda_hat, opt, a0);
    if (opt.method == FitMethod::NewtonCG && !(out.residual <= opt.tol)) {
        FitOptions fp = opt;
        fp.method = FitMethod::FixedPoint;
        out = fit_fixed_point(K, targets, lambda_hat, fp, out.dual);
    }
    out.residual = stationarity_residual(K, out.dual, targets, lambda_hat);
    if (!(out.residual <= opt.tol))
        throw SolverError("kernel dual fit did not reach tolerance", out.residual);
    return out;
}

TableResult run_table(const GramSpec& spec, const FitOptions& opt) {
    GramFactors f = build_factors(spec);
    const std::size_t n = spec.n;
    const std::size_t nb = f.flipped;

    CorruptionSetting setting{n, spec.p, spec.c_nominal, spec.lambda_hat};
    const TeacherDual td = solve_teacher(setting);
    const StudentDual sd = solve_student(setting, td);
    const PredictionProfile tp = teacher_predictions(td, setting);
    const PredictionProfile sp = student_predictions(sd, td, setting);

    TableResult out;
    auto run_block = [&](const BlockKernel& K, std::size_t offset, std::vector<TableRow>& rows,
                         const PredictionProfile& tprof, const PredictionProfile& sprof,
                         bool class1) {
        MatVec mv = [&K](const Eigen::VectorXd& v, Eigen::VectorXd& o) { K.apply(v, o); };
        Eigen::VectorXd t(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) t[static_cast<Eigen::Index>(i)] = f.labels[offset + i];
        KernelModel teacher = fit_dual(mv, t, spec.lambda_hat, opt);
        KernelModel student = fit_dual(mv, teacher.predictions, spec.lambda_hat, opt, &teacher.dual);
        out.max_residual = std::max({out.max_residual, teacher.residual, student.residual});
        const double tb = class1 ? tprof.bad1 : tprof.bad0;
        const double tg = class1 ? tprof.good1 : tprof.good0;
        const double sb = class1 ? sprof.bad1 : sprof.bad0;
        const double sg = class1 ? sprof.good1 : sprof.good0;
        rows.push_back({"teacher", "bad", group_mean(teacher.predictions, 0, nb), tb});
        rows.push_back({"teacher", "good", group_mean(teacher.predictions, nb, n), tg});
        rows.push_back({"student", "bad", group_mean(student.predictions, 0, nb), sb});
        rows.push_back({"student", "good", group_mean(student.predictions, nb, n), sg});
    };
    run_block(f.K1, 0, out.rows, tp, sp, true);
    run_block(f.K0, n, out.class0, tp, sp, false);
    return out;
}

}  // namespace sdlab
