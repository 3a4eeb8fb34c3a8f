#pragma once

// Dynamic-temperature knowledge distillation: per-sample sharpness, the
// temperature split derived from row maxima, the DTKD loss, fixed and
// asymmetric baselines, the target/non-target decomposition, and analytic
// gradients with respect to student logits.

#include "dtkd/numkit.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace dtkd::distill {

using numkit::Matrix;

/// Whether the per-sample temperatures (and the t_teacher * t_student loss
/// scale) contribute gradients through the student's row max, or are treated
/// as constants of the iteration.
enum class TempGradMode { kFlow, kDetach };

/// How the target/non-target decomposed loss is wired into the combined loss:
/// disabled, at the fixed reference temperature, or at the per-sample dynamic
/// temperatures.
enum class DkdMode { kOff, kFixedTemp, kDtkdTemp };

/// Per-sample temperature split around a reference: t_teacher = reference +
/// delta and t_student = reference - delta, constructed exactly in that form.
struct TemperaturePair {
    double t_teacher = 0.0;
    double t_student = 0.0;
    double delta = 0.0;
    double reference = 0.0;
    bool degenerate = false; // fallback (reference, reference) was used
};

struct DistillConfig {
    double tau_ref = 4.0;
    double alpha = 3.0; // dynamic-temperature term weight
    double beta = 1.0;  // fixed-temperature KL weight
    double gamma = 1.0; // cross-entropy weight
    TempGradMode temp_grad_mode = TempGradMode::kFlow;
    DkdMode dkd_mode = DkdMode::kOff;
    bool tckd_enabled = true;
    bool nckd_enabled = true;
    // Experimentation switch: derive temperatures from the per-row max of
    // absolute values instead of the signed max.
    bool use_abs_max = false;
    double epsilon_floor = 1e-6;

    void validate() const; // throws std::domain_error
};

struct LossBreakdown {
    double dtkd_term = 0.0;
    double fixed_kl_term = 0.0;
    double ce_term = 0.0;
    double total = 0.0;
    std::vector<TemperaturePair> per_sample_temps;
};

struct DkdTerms {
    double tckd = 0.0;
    double nckd = 0.0;
    double teacher_target_prob = 0.0;
};

/// logsumexp(row / temperature) for every row.
std::vector<double> sharpness(const Matrix &logits, double temperature);

/// Derives the per-sample temperature pair from the signed row maxima
/// x = max(teacher_row), y = max(student_row):
///   delta = tau_ref * (x - y) / (x + y),
///   t_teacher = tau_ref + delta,  t_student = tau_ref - delta.
/// Falls back to (tau_ref, tau_ref) and sets the degenerate flag when the
/// maxima cannot produce two positive temperatures (x + y <= epsilon_floor,
/// or either max is non-positive).
TemperaturePair dynamic_temperatures(std::span<const double> teacher_row,
                                     std::span<const double> student_row, double tau_ref,
                                     double epsilon_floor = 1e-6, bool use_abs_max = false);

/// (1/N) sum_i t_teacher_i * t_student_i * KL(p_i, q_i) where p_i, q_i are the
/// teacher/student rows softened at their per-sample temperatures. Also
/// returns the temperature list for logging.
std::pair<double, std::vector<TemperaturePair>>
dtkd_loss(const Matrix &teacher, const Matrix &student, const DistillConfig &config);

/// (1/N) sum_i tau^2 * KL(softmax(u_i/tau), softmax(v_i/tau)).
double kd_loss_fixed(const Matrix &teacher, const Matrix &student, double tau);

/// (1/N) sum_i t_teacher * t_student * KL(softmax(u_i/t_teacher),
/// softmax(v_i/t_student)) with two fixed, possibly unequal temperatures.
double kd_loss_asymmetric(const Matrix &teacher, const Matrix &student, double t_teacher,
                          double t_student);

/// Full loss stack: alpha * distillation term + beta * fixed KL + gamma * CE.
/// The distillation term is the DTKD loss when dkd_mode is off, otherwise the
/// enabled target/non-target terms at fixed or dynamic temperatures, each
/// scaled by t_teacher * t_student. per_sample_temps always carries the
/// dynamically derived pairs.
LossBreakdown combined_loss(const Matrix &teacher, const Matrix &student,
                            const std::vector<int> &labels, const DistillConfig &config);

/// Target/non-target decomposition at the given temperatures: tckd is the KL
/// over the binary (target, rest) split, nckd the KL over the renormalized
/// non-target distributions.
DkdTerms dkd_terms(std::span<const double> teacher_row, std::span<const double> student_row,
                   double t_teacher, double t_student, std::size_t target);

/// d(total combined loss) / d(student logits), same shape as student. In flow
/// mode the dependence of the temperatures and the t_teacher * t_student
/// scale on the student's row max enters through a subgradient at the
/// first-occurrence argmax coordinate.
Matrix student_logit_gradient(const Matrix &teacher, const Matrix &student,
                              const std::vector<int> &labels, const DistillConfig &config);

/// d(mean cross-entropy) / d(student logits) = (softmax(v_i) - onehot_i) / N.
Matrix ce_logit_gradient(const Matrix &student, const std::vector<int> &labels);

/// d(kd_loss_asymmetric) / d(student logits) = t_teacher * (q_i - p_i) / N.
Matrix asymmetric_kl_logit_gradient(const Matrix &teacher, const Matrix &student,
                                    double t_teacher, double t_student);

} // namespace dtkd::distill
