#pragma once

#include <array>
#include <cstddef>

namespace sdlab {

/// Binary setting with a fraction p of each class flipped.
struct CorruptionSetting {
    std::size_t n = 5000;     // samples per class
    double p = 0.0;           // corruption fraction, [0, 0.5)
    double c = 0.5;           // within-class feature correlation, (0, 1)
    double lambda_hat = 1.0;  // 2 n lambda

    double r() const noexcept { return (1.0 - c) / (4.0 * lambda_hat); }
    void validate() const;
};

struct TeacherDual {
    double alpha = 0.0;
    double alpha_hat = 0.0;
    std::array<double, 2> residual{};
};

struct StudentDual {
    double beta = 0.0;
    double beta_hat = 0.0;
    std::array<double, 2> residual{};
};

/// Probability of label 1 for the four groups.
/// bad1/good1: true class 1, observed 0/1. bad0/good0: true class 0, observed 1/0.
struct PredictionProfile {
    double bad1 = 0.0;
    double good1 = 0.0;
    double bad0 = 0.0;
    double good0 = 0.0;
};

struct PInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool empty = false;
};

struct Variability {
    double delta_T = 0.0;
    double delta_S = 0.0;
};

struct MaclaurinResiduals {
    double zeta = 0.0;
    double zeta_prime = 0.0;
};

double sigmoid(double z) noexcept;
/// eps(z) = sigmoid(z) - 1/2 - z/4.
double maclaurin_eps(double z) noexcept;

TeacherDual solve_teacher(const CorruptionSetting& setting);
StudentDual solve_student(const CorruptionSetting& setting, const TeacherDual& teacher);

/// Defects of the two teacher equations at (alpha, alpha_hat), by direct substitution.
std::array<double, 2> teacher_residual(const CorruptionSetting& setting, double alpha,
                                       double alpha_hat);
std::array<double, 2> student_residual(const CorruptionSetting& setting,
                                       const TeacherDual& teacher, double beta, double beta_hat);

PredictionProfile teacher_predictions(const TeacherDual& dual, const CorruptionSetting& setting);
PredictionProfile student_predictions(const StudentDual& student, const TeacherDual& teacher,
                                      const CorruptionSetting& setting);

/// Large-n closed form with the Maclaurin residuals as inputs.
/// zeta = zeta_prime = 0 gives the first-order (linearized) profile.
PredictionProfile closed_form_teacher(const CorruptionSetting& setting, double zeta);
PredictionProfile closed_form_student(const CorruptionSetting& setting, double zeta,
                                      double zeta_prime);

/// Training accuracy. A probability of exactly 1/2 predicts class 0.
double group_accuracy(const PredictionProfile& profile, double p);

PInterval thm1_p_interval(double r);

/// Spread |good1 - bad1| of each model.
Variability variability(const PredictionProfile& teacher, const PredictionProfile& student);
/// Same quantity from the duals: 1 - lh(a + ah) and 1 - lh(a + b + ah + bh).
Variability variability_from_duals(const TeacherDual& teacher, const StudentDual& student,
                                   const CorruptionSetting& setting);

MaclaurinResiduals maclaurin_residuals(const TeacherDual& teacher, const StudentDual& student,
                                       const CorruptionSetting& setting);

}  // namespace sdlab
