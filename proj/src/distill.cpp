#include "dtkd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dtkd::distill {

namespace {

using numkit::cross_entropy;
using numkit::kl_div;
using numkit::row_max;
using numkit::tempered_softmax;
using numkit::validate_logits;

numkit::RowMax abs_row_max(std::span<const double> row) {
    numkit::RowMax best{std::abs(row[0]), 0};
    for (std::size_t i = 1; i < row.size(); ++i) {
        double a = std::abs(row[i]);
        if (a > best.value) {
            best.value = a;
            best.index = i;
        }
    }
    return best;
}

void check_pair_shapes(const Matrix &teacher, const Matrix &student, const char *what) {
    validate_logits(teacher, what);
    validate_logits(student, what);
    if (teacher.rows() != student.rows() || teacher.cols() != student.cols())
        throw std::domain_error(std::string(what) + ": teacher/student shape mismatch");
}

void check_labels(const std::vector<int> &labels, std::size_t n, std::size_t k,
                  const char *what) {
    if (labels.size() != n)
        throw std::domain_error(std::string(what) + ": label count does not match rows");
    for (int label : labels)
        if (label < 0 || static_cast<std::size_t>(label) >= k)
            throw std::domain_error(std::string(what) + ": label out of range");
}

// row / temperature minus its logsumexp. Stays finite for temperature splits
// where the plain softmax would underflow to exact zeros.
std::vector<double> log_softmax(std::span<const double> row, double temperature) {
    std::vector<double> out(row.size());
    double max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < row.size(); ++i) {
        out[i] = row[i] / temperature;
        max = std::max(max, out[i]);
    }
    double sum = 0.0;
    for (double v : out)
        sum += std::exp(v - max);
    double lse = max + std::log(sum);
    for (double &v : out)
        v -= lse;
    return out;
}

double kl_from_logs(const std::vector<double> &logp, const std::vector<double> &logq) {
    double sum = 0.0;
    for (std::size_t i = 0; i < logp.size(); ++i) {
        double p = std::exp(logp[i]);
        if (p > 0.0)
            sum += p * (logp[i] - logq[i]);
    }
    return std::max(sum, 0.0);
}

struct DkdEval {
    double tckd;
    double nckd;
    double teacher_target_prob;
    double student_target_prob;
};

// Shared evaluation of the target/non-target decomposition from tempered
// log-probabilities.
DkdEval eval_dkd(const std::vector<double> &logp, const std::vector<double> &logq,
                 std::size_t target) {
    double pt = std::exp(logp[target]);
    double qt = std::exp(logq[target]);
    if (1.0 - pt <= 1e-15 || 1.0 - qt <= 1e-15)
        throw std::domain_error("dkd: non-target probability mass vanished");
    double rest_ratio = std::log((1.0 - pt) / (1.0 - qt));
    double tckd = (1.0 - pt) * rest_ratio;
    if (pt > 0.0)
        tckd += pt * (logp[target] - logq[target]);
    double nckd = 0.0;
    for (std::size_t i = 0; i < logp.size(); ++i) {
        if (i == target)
            continue;
        double phat = std::exp(logp[i]) / (1.0 - pt);
        if (phat > 0.0)
            nckd += phat * ((logp[i] - logq[i]) - rest_ratio);
    }
    return {std::max(tckd, 0.0), std::max(nckd, 0.0), pt, qt};
}

// Scale factor of the distillation term and its derivative pieces with
// respect to the student row max y, given the teacher row max x.
struct TempChain {
    double d_ts_dy; // d t_student / d y
    double d_tt_dy; // d t_teacher / d y
    double dc_dy;   // d (t_teacher * t_student) / d y
};

TempChain temp_chain(double x, double y, double tau) {
    double s = x + y;
    TempChain c{};
    c.d_ts_dy = 2.0 * tau * x / (s * s);
    c.d_tt_dy = -c.d_ts_dy;
    c.dc_dy = 4.0 * x * tau * tau * (x - y) / (s * s * s);
    return c;
}

} // namespace

void DistillConfig::validate() const {
    if (!(tau_ref > 0.0))
        throw std::domain_error("DistillConfig: tau_ref must be positive");
    if (!(epsilon_floor > 0.0))
        throw std::domain_error("DistillConfig: epsilon_floor must be positive");
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0)
        throw std::domain_error("DistillConfig: loss weights must be non-negative");
    if (alpha == 0.0 && beta == 0.0 && gamma == 0.0)
        throw std::domain_error("DistillConfig: at least one loss weight must be positive");
    if (dkd_mode != DkdMode::kOff && !tckd_enabled && !nckd_enabled)
        throw std::domain_error("DistillConfig: dkd enabled with no tckd/nckd term");
}

std::vector<double> sharpness(const Matrix &logits, double temperature) {
    if (!(temperature > 0.0))
        throw std::domain_error("sharpness: temperature must be positive");
    validate_logits(logits, "sharpness");
    std::vector<double> out(logits.rows());
    std::vector<double> scaled(logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        for (std::size_t j = 0; j < row.size(); ++j)
            scaled[j] = row[j] / temperature;
        out[i] = numkit::logsumexp(scaled);
    }
    return out;
}

TemperaturePair dynamic_temperatures(std::span<const double> teacher_row,
                                     std::span<const double> student_row, double tau_ref,
                                     double epsilon_floor, bool use_abs_max) {
    if (!(tau_ref > 0.0))
        throw std::domain_error("dynamic_temperatures: tau_ref must be positive");
    if (!(epsilon_floor > 0.0))
        throw std::domain_error("dynamic_temperatures: epsilon_floor must be positive");
    if (teacher_row.size() != student_row.size())
        throw std::domain_error("dynamic_temperatures: row length mismatch");
    double x = use_abs_max ? abs_row_max(teacher_row).value : row_max(teacher_row).value;
    double y = use_abs_max ? abs_row_max(student_row).value : row_max(student_row).value;

    TemperaturePair pair;
    pair.reference = tau_ref;
    // Both temperatures must come out positive; non-positive or cancelling
    // maxima fall back to the reference.
    if (x <= 0.0 || y <= 0.0 || x + y <= epsilon_floor) {
        pair.t_teacher = tau_ref;
        pair.t_student = tau_ref;
        pair.delta = 0.0;
        pair.degenerate = true;
        return pair;
    }
    pair.delta = tau_ref * (x - y) / (x + y);
    pair.t_teacher = tau_ref + pair.delta;
    pair.t_student = tau_ref - pair.delta;
    return pair;
}

std::pair<double, std::vector<TemperaturePair>>
dtkd_loss(const Matrix &teacher, const Matrix &student, const DistillConfig &config) {
    check_pair_shapes(teacher, student, "dtkd_loss");
    config.validate();
    const std::size_t n = teacher.rows();
    std::vector<TemperaturePair> temps;
    temps.reserve(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto u = teacher.row(i);
        auto v = student.row(i);
        TemperaturePair pair = dynamic_temperatures(u, v, config.tau_ref, config.epsilon_floor,
                                                    config.use_abs_max);
        auto logp = log_softmax(u, pair.t_teacher);
        auto logq = log_softmax(v, pair.t_student);
        acc += pair.t_teacher * pair.t_student * kl_from_logs(logp, logq);
        temps.push_back(pair);
    }
    return {acc / static_cast<double>(n), std::move(temps)};
}

double kd_loss_asymmetric(const Matrix &teacher, const Matrix &student, double t_teacher,
                          double t_student) {
    if (!(t_teacher > 0.0) || !(t_student > 0.0))
        throw std::domain_error("kd_loss_asymmetric: temperatures must be positive");
    check_pair_shapes(teacher, student, "kd_loss_asymmetric");
    double acc = 0.0;
    for (std::size_t i = 0; i < teacher.rows(); ++i) {
        auto logp = log_softmax(teacher.row(i), t_teacher);
        auto logq = log_softmax(student.row(i), t_student);
        acc += t_teacher * t_student * kl_from_logs(logp, logq);
    }
    return acc / static_cast<double>(teacher.rows());
}

double kd_loss_fixed(const Matrix &teacher, const Matrix &student, double tau) {
    if (!(tau > 0.0))
        throw std::domain_error("kd_loss_fixed: tau must be positive");
    return kd_loss_asymmetric(teacher, student, tau, tau);
}

DkdTerms dkd_terms(std::span<const double> teacher_row, std::span<const double> student_row,
                   double t_teacher, double t_student, std::size_t target) {
    if (!(t_teacher > 0.0) || !(t_student > 0.0))
        throw std::domain_error("dkd_terms: temperatures must be positive");
    if (teacher_row.size() != student_row.size())
        throw std::domain_error("dkd_terms: row length mismatch");
    if (target >= teacher_row.size())
        throw std::domain_error("dkd_terms: target out of range");
    auto logp = log_softmax(teacher_row, t_teacher);
    auto logq = log_softmax(student_row, t_student);
    DkdEval eval = eval_dkd(logp, logq, target);
    return {eval.tckd, eval.nckd, eval.teacher_target_prob};
}

LossBreakdown combined_loss(const Matrix &teacher, const Matrix &student,
                            const std::vector<int> &labels, const DistillConfig &config) {
    check_pair_shapes(teacher, student, "combined_loss");
    check_labels(labels, student.rows(), student.cols(), "combined_loss");
    config.validate();
    const std::size_t n = teacher.rows();

    LossBreakdown out;
    if (config.dkd_mode == DkdMode::kOff) {
        auto [value, temps] = dtkd_loss(teacher, student, config);
        out.dtkd_term = value;
        out.per_sample_temps = std::move(temps);
    } else {
        out.per_sample_temps.reserve(n);
        double wt = config.tckd_enabled ? 1.0 : 0.0;
        double wn = config.nckd_enabled ? 1.0 : 0.0;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto u = teacher.row(i);
            auto v = student.row(i);
            TemperaturePair pair = dynamic_temperatures(u, v, config.tau_ref,
                                                        config.epsilon_floor,
                                                        config.use_abs_max);
            double tt = config.dkd_mode == DkdMode::kFixedTemp ? config.tau_ref : pair.t_teacher;
            double ts = config.dkd_mode == DkdMode::kFixedTemp ? config.tau_ref : pair.t_student;
            DkdTerms terms = dkd_terms(u, v, tt, ts, static_cast<std::size_t>(labels[i]));
            acc += tt * ts * (wt * terms.tckd + wn * terms.nckd);
            out.per_sample_temps.push_back(pair);
        }
        out.dtkd_term = acc / static_cast<double>(n);
    }

    out.fixed_kl_term = kd_loss_fixed(teacher, student, config.tau_ref);

    double ce = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        ce += cross_entropy(student.row(i), static_cast<std::size_t>(labels[i]));
    out.ce_term = ce / static_cast<double>(n);

    out.total = config.alpha * out.dtkd_term + config.beta * out.fixed_kl_term +
                config.gamma * out.ce_term;
    return out;
}

Matrix ce_logit_gradient(const Matrix &student, const std::vector<int> &labels) {
    validate_logits(student, "ce_logit_gradient");
    check_labels(labels, student.rows(), student.cols(), "ce_logit_gradient");
    const std::size_t n = student.rows();
    const std::size_t k = student.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    Matrix grad(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        auto probs = tempered_softmax(student.row(i), 1.0);
        auto g = grad.row(i);
        for (std::size_t j = 0; j < k; ++j)
            g[j] = inv_n * (probs[j] - (static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0));
    }
    return grad;
}

Matrix asymmetric_kl_logit_gradient(const Matrix &teacher, const Matrix &student,
                                    double t_teacher, double t_student) {
    if (!(t_teacher > 0.0) || !(t_student > 0.0))
        throw std::domain_error("asymmetric_kl_logit_gradient: temperatures must be positive");
    check_pair_shapes(teacher, student, "asymmetric_kl_logit_gradient");
    const std::size_t n = teacher.rows();
    const std::size_t k = teacher.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    Matrix grad(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        auto logp = log_softmax(teacher.row(i), t_teacher);
        auto logq = log_softmax(student.row(i), t_student);
        auto g = grad.row(i);
        // d/dv of t1*t2*KL is t1*t2*(q - p)/t2 = t1*(q - p)
        for (std::size_t j = 0; j < k; ++j)
            g[j] = inv_n * t_teacher * (std::exp(logq[j]) - std::exp(logp[j]));
    }
    return grad;
}

namespace {

// Accumulates the gradient of one sample's alpha-weighted distillation term
// (plain dynamic-temperature KL, or the decomposed variant) into g.
void accumulate_distill_gradient(std::span<const double> u, std::span<const double> v,
                                 std::size_t target, const DistillConfig &config, double weight,
                                 std::span<double> g) {
    const std::size_t k = u.size();
    const double tau = config.tau_ref;

    TemperaturePair pair = dynamic_temperatures(u, v, tau, config.epsilon_floor,
                                                config.use_abs_max);
    double tt = pair.t_teacher;
    double ts = pair.t_student;
    bool dynamic_temps = config.dkd_mode != DkdMode::kFixedTemp;
    if (!dynamic_temps) {
        tt = tau;
        ts = tau;
    }
    const double scale = tt * ts;

    auto logp = log_softmax(u, tt);
    auto logq = log_softmax(v, ts);
    std::vector<double> p(k), q(k);
    for (std::size_t j = 0; j < k; ++j) {
        p[j] = std::exp(logp[j]);
        q[j] = std::exp(logq[j]);
    }

    // Per-sample factor f and its gradients with respect to the tempered
    // teacher logits (ga) and tempered student logits (gb).
    double f = 0.0;
    std::vector<double> gb(k), ga(k);
    if (config.dkd_mode == DkdMode::kOff) {
        double kl = kl_from_logs(logp, logq);
        f = kl;
        for (std::size_t j = 0; j < k; ++j) {
            gb[j] = q[j] - p[j];
            ga[j] = p[j] * ((logp[j] - logq[j]) - kl);
        }
    } else {
        DkdEval eval = eval_dkd(logp, logq, target);
        double wt = config.tckd_enabled ? 1.0 : 0.0;
        double wn = config.nckd_enabled ? 1.0 : 0.0;
        f = wt * eval.tckd + wn * eval.nckd;
        double pt = eval.teacher_target_prob;
        double qt = eval.student_target_prob;
        double rest_ratio = std::log((1.0 - pt) / (1.0 - qt));
        double dtckd_dqt = (1.0 - pt) / (1.0 - qt) - pt / qt;
        double dtckd_dpt = (logp[target] - logq[target]) - rest_ratio;
        for (std::size_t j = 0; j < k; ++j) {
            double t_ind = j == target ? 1.0 : 0.0;
            gb[j] = wt * dtckd_dqt * qt * (t_ind - q[j]);
            ga[j] = wt * dtckd_dpt * pt * (t_ind - p[j]);
            if (j != target) {
                double phat = p[j] / (1.0 - pt);
                double qhat = q[j] / (1.0 - qt);
                double rhat = (logp[j] - logq[j]) - rest_ratio;
                gb[j] += wn * (qhat - phat);
                ga[j] += wn * phat * (rhat - eval.nckd);
            }
        }
    }

    // Direct path through the tempered student logits b = v / t_student.
    const double base = weight * scale / ts;
    for (std::size_t j = 0; j < k; ++j)
        g[j] += base * gb[j];

    // Temperature path: only when the temperatures are live functions of the
    // student's row max. gb and ga both sum to zero, so the logsumexp shift in
    // logq/logp drops out of the inner products.
    if (config.temp_grad_mode == TempGradMode::kFlow && dynamic_temps && !pair.degenerate) {
        numkit::RowMax tmax = config.use_abs_max ? abs_row_max(u) : row_max(u);
        numkit::RowMax smax = config.use_abs_max ? abs_row_max(v) : row_max(v);
        double x = tmax.value;
        double y = smax.value;
        double dsign = 1.0;
        if (config.use_abs_max && v[smax.index] < 0.0)
            dsign = -1.0;

        double sum_b = 0.0;
        double sum_a = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            sum_b += gb[j] * logq[j];
            sum_a += ga[j] * logp[j];
        }
        TempChain chain = temp_chain(x, y, tau);
        double extra = -scale * (chain.d_ts_dy / ts) * sum_b -
                       scale * (chain.d_tt_dy / tt) * sum_a + chain.dc_dy * f;
        g[smax.index] += weight * dsign * extra;
    }
}

} // namespace

Matrix student_logit_gradient(const Matrix &teacher, const Matrix &student,
                              const std::vector<int> &labels, const DistillConfig &config) {
    check_pair_shapes(teacher, student, "student_logit_gradient");
    check_labels(labels, student.rows(), student.cols(), "student_logit_gradient");
    config.validate();
    const std::size_t n = student.rows();
    const std::size_t k = student.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    Matrix grad(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        auto u = teacher.row(i);
        auto v = student.row(i);
        auto g = grad.row(i);
        std::size_t label = static_cast<std::size_t>(labels[i]);

        if (config.gamma != 0.0) {
            auto probs = tempered_softmax(v, 1.0);
            for (std::size_t j = 0; j < k; ++j)
                g[j] += config.gamma * inv_n * (probs[j] - (j == label ? 1.0 : 0.0));
        }
        if (config.beta != 0.0) {
            auto logp = log_softmax(u, config.tau_ref);
            auto logq = log_softmax(v, config.tau_ref);
            const double coeff = config.beta * inv_n * config.tau_ref;
            for (std::size_t j = 0; j < k; ++j)
                g[j] += coeff * (std::exp(logq[j]) - std::exp(logp[j]));
        }
        if (config.alpha != 0.0)
            accumulate_distill_gradient(u, v, label, config, config.alpha * inv_n, g);
    }
    return grad;
}

} // namespace dtkd::distill
