#include "sdlab/probe_sd.hpp"

#include "sdlab/error.hpp"
#include "sdlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sdlab {

namespace {

constexpr int kMaxHalvings = 60;

Eigen::VectorXd row_lse(const Eigen::MatrixXd& Z) {
    Eigen::VectorXd out(Z.rows());
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        const double m = Z.row(i).maxCoeff();
        out[i] = m + std::log((Z.row(i).array() - m).exp().sum());
    }
    return out;
}

void check_targets(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Q) {
    if (Q.rows() != X.rows()) throw InvalidInput("target rows do not match samples");
    for (Eigen::Index i = 0; i < Q.rows(); ++i)
        if (std::abs(Q.row(i).sum() - 1.0) > 1e-6) throw InvalidInput("soft targets must sum to 1");
}

void check_labels(const std::vector<int>& labels, int num_classes) {
    for (int y : labels)
        if (y < 0 || y >= num_classes) throw InvalidInput("label out of range");
}

FitReport gradient_descent(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Q, double lambda,
                           const ProbeConfig& opt, double step) {
    const Eigen::Index C = Q.cols();
    FitReport rep;
    rep.W = Eigen::MatrixXd::Zero(C, X.cols());
    double loss = softmax_objective(X, Q, rep.W, lambda);
    if (!std::isfinite(loss)) throw StepSizeError("initial loss is not finite");
    Eigen::MatrixXd G = softmax_gradient(X, Q, rep.W, lambda);

    if (opt.batch_size > 0 && static_cast<Eigen::Index>(opt.batch_size) < X.rows()) {
        const std::size_t N = static_cast<std::size_t>(X.rows());
        std::vector<std::size_t> order(N);
        for (std::size_t e = 0; e < opt.epochs; ++e) {
            std::iota(order.begin(), order.end(), 0);
            CounterRng rng(opt.seed, 1000 + e);
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t b = 0; b < N; b += opt.batch_size) {
                std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b),
                                             order.begin() + static_cast<std::ptrdiff_t>(std::min(N, b + opt.batch_size)));
                rep.W -= step * softmax_gradient(take_rows(X, idx), take_rows(Q, idx), rep.W, lambda);
                ++rep.steps;
            }
            loss = softmax_objective(X, Q, rep.W, lambda);
            if (!std::isfinite(loss)) throw StepSizeError("loss diverged; reduce the step size");
        }
        rep.loss = loss;
        rep.grad_norm = softmax_gradient(X, Q, rep.W, lambda).norm();
        rep.step_size = step;
        return rep;
    }

    for (std::size_t e = 0; e < opt.epochs; ++e) {
        if (G.norm() <= 1e-12) break;
        bool moved = false;
        for (int h = 0; h <= kMaxHalvings; ++h) {
            Eigen::MatrixXd Wn = rep.W - step * G;
            const double ln = softmax_objective(X, Q, Wn, lambda);
            if (std::isfinite(ln) && ln < loss) {
                rep.W = std::move(Wn);
                loss = ln;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
        G = softmax_gradient(X, Q, rep.W, lambda);
        ++rep.steps;
    }
    if (!std::isfinite(loss)) throw StepSizeError("loss diverged");
    rep.loss = loss;
    rep.grad_norm = G.norm();
    rep.step_size = step;
    return rep;
}

}  // namespace

void FeatureDataset::validate() const {
    if (num_classes < 2) throw InvalidInput("need at least two classes");
    if (static_cast<std::size_t>(features.rows()) != labels.size())
        throw InvalidInput("feature rows and labels differ in count");
    check_labels(labels, num_classes);
    if (superclass && superclass->size() != static_cast<std::size_t>(num_classes))
        throw InvalidInput("superclass map must cover every class");
    std::vector<char> seen(labels.size(), 0);
    for (std::size_t i : train) {
        if (i >= labels.size()) throw InvalidInput("train index out of range");
        seen[i] = 1;
    }
    for (std::size_t i : test) {
        if (i >= labels.size()) throw InvalidInput("test index out of range");
        if (seen[i]) throw InvalidInput("train and test splits overlap");
    }
}

const std::vector<double>& default_lr_grid() {
    static const std::vector<double> grid{0.001, 0.005, 0.01, 0.05, 0.1, 0.5};
    return grid;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd P(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        P.row(i) = (logits.row(i).array() - m).exp();
        P.row(i) /= P.row(i).sum();
    }
    return P;
}

Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W) {
    return softmax_rows(X * W.transpose());
}

Eigen::MatrixXd one_hot(const std::vector<int>& labels, int num_classes) {
    check_labels(labels, num_classes);
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) Y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
    return Y;
}

double softmax_objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Q,
                         const Eigen::MatrixXd& W, double lambda) {
    const Eigen::MatrixXd Z = X * W.transpose();
    const Eigen::VectorXd lse = row_lse(Z);
    // -sum_c q_c log p_c = lse * sum_c q_c - q.z
    const double ce = (lse.array() * Q.rowwise().sum().array()).sum() - Q.cwiseProduct(Z).sum();
    return ce / static_cast<double>(X.rows()) + 0.5 * lambda * W.squaredNorm();
}

Eigen::MatrixXd softmax_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Q,
                                 const Eigen::MatrixXd& W, double lambda) {
    const Eigen::MatrixXd P = predict_proba(X, W);
    Eigen::MatrixXd R = P;
    for (Eigen::Index i = 0; i < P.rows(); ++i) R.row(i) *= Q.row(i).sum();
    R -= Q;
    return R.transpose() * X / static_cast<double>(X.rows()) + lambda * W;
}

double xi_mixed_objective(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                          const Eigen::MatrixXd& teacher_probs, double xi,
                          const Eigen::MatrixXd& W, double lambda) {
    const Eigen::MatrixXd Z = X * W.transpose();
    const Eigen::VectorXd lse = row_lse(Z);
    double soft = 0.0;
    double hard = 0.0;
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        for (Eigen::Index c = 0; c < Z.cols(); ++c)
            soft -= teacher_probs(i, c) * (Z(i, c) - lse[i]);
        hard -= Z(i, labels[static_cast<std::size_t>(i)]) - lse[i];
    }
    const double N = static_cast<double>(X.rows());
    return (xi * soft + (1.0 - xi) * hard) / N + 0.5 * lambda * W.squaredNorm();
}

Eigen::MatrixXd xi_mixed_gradient(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                  const Eigen::MatrixXd& teacher_probs, double xi,
                                  const Eigen::MatrixXd& W, double lambda) {
    const Eigen::MatrixXd P = predict_proba(X, W);
    const Eigen::MatrixXd Y = one_hot(labels, static_cast<int>(W.rows()));
    Eigen::MatrixXd soft = P - teacher_probs;
    Eigen::MatrixXd hard = P - Y;
    const double N = static_cast<double>(X.rows());
    return (xi * soft.transpose() * X + (1.0 - xi) * hard.transpose() * X) / N + lambda * W;
}

FitReport fit_softmax(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Q, double lambda,
                      const ProbeConfig& opt) {
    if (!(lambda > 0.0)) throw InvalidInput("lambda must be positive");
    if (opt.epochs < 1) throw InvalidInput("epochs must be at least 1");
    check_targets(X, Q);
    if (opt.step_size > 0.0) return gradient_descent(X, Q, lambda, opt, opt.step_size);
    FitReport best;
    bool have = false;
    for (double lr : default_lr_grid()) {
        FitReport r = gradient_descent(X, Q, lambda, opt, lr);
        if (!have || r.loss < best.loss) {
            best = std::move(r);
            have = true;
        }
    }
    return best;
}

FitReport fit_softmax(const Eigen::MatrixXd& X, const std::vector<int>& labels, int num_classes,
                      double lambda, const ProbeConfig& opt) {
    if (labels.size() != static_cast<std::size_t>(X.rows()))
        throw InvalidInput("labels and samples differ in count");
    return fit_softmax(X, one_hot(labels, num_classes), lambda, opt);
}

FitReport distill(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                  const Eigen::MatrixXd& teacher_probs, double xi, double lambda,
                  const ProbeConfig& opt) {
    if (!std::isfinite(xi)) throw InvalidInput("xi must be finite");
    if (teacher_probs.rows() != X.rows()) throw InvalidInput("teacher predictions do not match samples");
    const Eigen::MatrixXd Y = one_hot(labels, static_cast<int>(teacher_probs.cols()));
    const Eigen::MatrixXd Q = xi * teacher_probs + (1.0 - xi) * Y;
    return fit_softmax(X, Q, lambda, opt);
}

Eigen::MatrixXd class_confusion(const Eigen::MatrixXd& probs, const std::vector<int>& labels,
                                int num_classes) {
    Eigen::MatrixXd nu = Eigen::MatrixXd::Zero(num_classes, num_classes);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        nu.row(labels[i]) += probs.row(static_cast<Eigen::Index>(i));
        count[labels[i]] += 1.0;
    }
    for (int c = 0; c < num_classes; ++c)
        if (count[c] > 0.0) nu.row(c) /= count[c];
    return nu;
}

std::vector<int> hard_classes(const Eigen::MatrixXd& confusion, int c, std::size_t k) {
    const int C = static_cast<int>(confusion.cols());
    if (k < 1 || k > static_cast<std::size_t>(C - 1))
        throw InvalidInput("k must lie in [1, C-1]");
    std::vector<int> others;
    for (int j = 0; j < C; ++j)
        if (j != c) others.push_back(j);
    std::stable_sort(others.begin(), others.end(), [&](int a, int b) {
        return confusion(c, a) > confusion(c, b);
    });
    others.resize(k);
    return others;
}

std::vector<int> corrupt_labels(const std::vector<int>& labels, int num_classes,
                                const CorruptionSpec& spec, const std::vector<int>* superclass,
                                const Eigen::MatrixXd* confusion) {
    if (!(spec.level >= 0.0 && spec.level <= 1.0)) throw InvalidInput("level must lie in [0, 1]");
    check_labels(labels, num_classes);
    std::vector<std::vector<int>> choices(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        auto& opts = choices[static_cast<std::size_t>(c)];
        switch (spec.kind) {
        case CorruptionKind::Random:
            for (int j = 0; j < num_classes; ++j)
                if (j != c) opts.push_back(j);
            break;
        case CorruptionKind::Hierarchical:
            if (!superclass || superclass->size() != static_cast<std::size_t>(num_classes))
                throw InvalidInput("hierarchical corruption needs a superclass map");
            for (int j = 0; j < num_classes; ++j)
                if (j != c && (*superclass)[j] == (*superclass)[c]) opts.push_back(j);
            if (opts.empty()) throw InvalidInput("superclass has a single member; nothing to flip to");
            break;
        case CorruptionKind::Adversarial:
            if (!confusion || confusion->rows() != num_classes || confusion->cols() != num_classes)
                throw InvalidInput("adversarial corruption needs a clean-teacher confusion profile");
            opts = hard_classes(*confusion, c, spec.k);
            break;
        }
    }
    CounterRng rng(spec.seed, 0);
    std::vector<int> out = labels;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!(rng.uniform(2 * i) < spec.level)) continue;
        const auto& opts = choices[static_cast<std::size_t>(labels[i])];
        auto pick = static_cast<std::size_t>(rng.uniform(2 * i + 1) * static_cast<double>(opts.size()));
        out[i] = opts[std::min(pick, opts.size() - 1)];
    }
    return out;
}

double accuracy(const Eigen::MatrixXd& probs, const std::vector<int>& labels) {
    if (labels.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        Eigen::Index arg = 0;
        probs.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
        if (arg == labels[i]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double per_class_variability(const Eigen::MatrixXd& probs, const std::vector<int>& labels, int c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != c) continue;
        const double v = probs(static_cast<Eigen::Index>(i), c);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo > hi) throw InvalidInput("class has no samples in the evaluation split");
    return hi - lo;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), X.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

std::vector<int> take(const std::vector<int>& v, const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v[i]);
    return out;
}

std::vector<ProbeResult> xi_sweep(const FeatureDataset& data, const CorruptionSpec& corruption,
                                  const std::vector<double>& xi_grid, const ProbeConfig& config) {
    data.validate();
    if (xi_grid.empty()) throw InvalidInput("xi grid is empty");
    const int C = data.num_classes;
    const Eigen::MatrixXd Xtr = take_rows(data.features, data.train);
    const Eigen::MatrixXd Xte = take_rows(data.features, data.test);
    const std::vector<int> ytr = take(data.labels, data.train);
    const std::vector<int> yte = take(data.labels, data.test);

    Eigen::MatrixXd confusion;
    const Eigen::MatrixXd* conf_ptr = nullptr;
    if (corruption.kind == CorruptionKind::Adversarial) {
        const FitReport clean = fit_softmax(Xtr, ytr, C, config.lambda, config);
        confusion = class_confusion(predict_proba(Xtr, clean.W), ytr, C);
        conf_ptr = &confusion;
    }
    const std::vector<int>* super = data.superclass ? &*data.superclass : nullptr;
    const std::vector<int> noisy = corrupt_labels(ytr, C, corruption, super, conf_ptr);

    const FitReport teacher = fit_softmax(Xtr, noisy, C, config.lambda, config);
    const Eigen::MatrixXd T = predict_proba(Xtr, teacher.W);
    const Eigen::MatrixXd Pt = predict_proba(Xte, teacher.W);
    const double tacc = accuracy(Pt, yte);

    std::vector<ProbeResult> out;
    for (double xi : xi_grid) {
        const FitReport student = distill(Xtr, noisy, T, xi, config.lambda, config);
        const Eigen::MatrixXd Ps = predict_proba(Xte, student.W);
        ProbeResult r;
        r.xi = xi;
        r.teacher_test_acc = tacc;
        r.student_test_acc = accuracy(Ps, yte);
        r.improvement = r.student_test_acc - r.teacher_test_acc;
        for (int c = 0; c < C; ++c)
            r.per_class_variability.emplace_back(per_class_variability(Pt, yte, c),
                                                 per_class_variability(Ps, yte, c));
        out.push_back(std::move(r));
    }
    return out;
}

FeatureDataset synthetic_clusters(const SyntheticSpec& spec) {
    if (spec.num_classes < 2 || spec.dim < 1 || spec.train_per_class < 1 || spec.test_per_class < 1)
        throw InvalidInput("invalid synthetic benchmark size");
    if (spec.superclass_size < 1) throw InvalidInput("superclass_size must be positive");
    const auto C = static_cast<std::size_t>(spec.num_classes);
    const auto d = static_cast<Eigen::Index>(spec.dim);

    CounterRng mean_rng(spec.seed, 10);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd means(static_cast<Eigen::Index>(C), d);
    for (std::size_t c = 0; c < C; ++c) {
        for (Eigen::Index j = 0; j < d; ++j) means(static_cast<Eigen::Index>(c), j) = gauss(mean_rng);
        means.row(static_cast<Eigen::Index>(c)).normalize();
    }
    means *= spec.separation;

    const std::size_t per = spec.train_per_class + spec.test_per_class;
    FeatureDataset out;
    out.num_classes = spec.num_classes;
    out.features.resize(static_cast<Eigen::Index>(C * per), d);
    out.labels.resize(C * per);
    CounterRng noise_rng(spec.seed, 11);
    std::size_t row = 0;
    for (int split = 0; split < 2; ++split) {
        const std::size_t count = split == 0 ? spec.train_per_class : spec.test_per_class;
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t k = 0; k < count; ++k, ++row) {
                for (Eigen::Index j = 0; j < d; ++j)
                    out.features(static_cast<Eigen::Index>(row), j) =
                        means(static_cast<Eigen::Index>(c), j) + gauss(noise_rng);
                out.labels[row] = static_cast<int>(c);
                (split == 0 ? out.train : out.test).push_back(row);
            }
        }
    }
    std::vector<int> sup(C);
    for (std::size_t c = 0; c < C; ++c) sup[c] = static_cast<int>(c) / spec.superclass_size;
    out.superclass = std::move(sup);
    return out;
}

}  // namespace sdlab
