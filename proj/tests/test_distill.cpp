#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dtkd/distill.hpp"

#include <cmath>
#include <vector>

using namespace dtkd::distill;
using dtkd::numkit::logsumexp;
using dtkd::numkit::Rng;
using dtkd::numkit::row_max;

namespace {

// Extended-precision oracle pipeline, kept deliberately naive and independent
// of the library code paths: raw exp sums in long double, no shift tricks.
std::vector<long double> oracle_softmax(std::span<const double> row, long double t) {
    std::vector<long double> out(row.size());
    long double sum = 0.0L;
    for (std::size_t i = 0; i < row.size(); ++i) {
        out[i] = std::exp(static_cast<long double>(row[i]) / t);
        sum += out[i];
    }
    for (auto &v : out)
        v /= sum;
    return out;
}

long double oracle_kl(const std::vector<long double> &p, const std::vector<long double> &q) {
    long double sum = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0L)
            sum += p[i] * std::log(p[i] / q[i]);
    return sum;
}

struct OracleTemps {
    long double t_teacher;
    long double t_student;
    bool degenerate;
};

OracleTemps oracle_temps(std::span<const double> u, std::span<const double> v, long double tau,
                         long double eps) {
    long double x = u[0], y = v[0];
    for (double e : u)
        x = std::max(x, static_cast<long double>(e));
    for (double e : v)
        y = std::max(y, static_cast<long double>(e));
    if (x <= 0.0L || y <= 0.0L || x + y <= eps)
        return {tau, tau, true};
    long double delta = tau * (x - y) / (x + y);
    return {tau + delta, tau - delta, false};
}

long double oracle_dtkd_sample(std::span<const double> u, std::span<const double> v,
                               long double tau, long double eps) {
    OracleTemps temps = oracle_temps(u, v, tau, eps);
    auto p = oracle_softmax(u, temps.t_teacher);
    auto q = oracle_softmax(v, temps.t_student);
    return temps.t_teacher * temps.t_student * oracle_kl(p, q);
}

long double oracle_asym_sample(std::span<const double> u, std::span<const double> v,
                               long double t1, long double t2) {
    auto p = oracle_softmax(u, t1);
    auto q = oracle_softmax(v, t2);
    return t1 * t2 * oracle_kl(p, q);
}

Matrix random_logits(Rng &rng, std::size_t n, std::size_t k, double lo = -4.0,
                     double hi = 4.0) {
    Matrix m(n, k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j)
            m(i, j) = rng.uniform(lo, hi);
    return m;
}

// Random logits whose signed row max is comfortably positive, so that the
// temperature derivation never hits the degenerate fallback.
Matrix random_positive_max_logits(Rng &rng, std::size_t n, std::size_t k) {
    Matrix m = random_logits(rng, n, k);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = m.row(i);
        if (row_max(r).value < 0.5)
            r[rng.uniform_index(k)] = rng.uniform(0.5, 4.0);
    }
    return m;
}

DistillConfig plain_config(double tau = 4.0) {
    DistillConfig cfg;
    cfg.tau_ref = tau;
    return cfg;
}

} // namespace

TEST_CASE("sharpness basics") {
    auto zeros = Matrix(3, 5, 0.0);
    for (double t : {0.5, 1.0, 4.0, 100.0}) {
        auto s = sharpness(zeros, t);
        for (double v : s)
            CHECK(v == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    }

    auto m = Matrix::from_rows({{2.0, 1.0, 0.5, -1.0}});
    auto s1 = sharpness(m, 1.0);
    CHECK(s1[0] == logsumexp(m.row(0)));

    CHECK_THROWS_AS(sharpness(m, 0.0), std::domain_error);
}

TEST_CASE("sharpness decreases on a temperature grid for positive-mean rows") {
    // The softmax-weighted mean of these rows stays positive on the whole
    // grid, which is exactly the regime where raising the temperature must
    // lower the sharpness.
    auto m = Matrix::from_rows({{2.0, 1.0, 0.0}, {5.0, 0.0, 1.0}, {0.25, 0.75, 0.5}});
    std::vector<double> grid{0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double prev = sharpness(m, grid[0])[i];
        for (std::size_t g = 1; g < grid.size(); ++g) {
            double cur = sharpness(m, grid[g])[i];
            CHECK(cur < prev);
            prev = cur;
        }
    }
}

TEST_CASE("dynamic temperature closed form") {
    double tau = 4.0;

    // identical rows: delta is exactly zero
    std::vector<double> row{1.0, 0.5, 2.0};
    auto same = dynamic_temperatures(row, row, tau);
    CHECK(same.t_teacher == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(same.t_student == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(same.delta == 0.0);
    CHECK(!same.degenerate);

    // x = 2, y = 1: delta = 4/3, temperatures (16/3, 8/3)
    std::vector<double> teacher{2.0, 0.0, -1.0};
    std::vector<double> student{1.0, 0.5, 0.0};
    auto pair = dynamic_temperatures(teacher, student, tau);
    CHECK(std::abs(pair.delta - 4.0 / 3.0) < 1e-12);
    CHECK(std::abs(pair.t_teacher - 16.0 / 3.0) < 1e-12);
    CHECK(std::abs(pair.t_student - 8.0 / 3.0) < 1e-12);

    // x = 3, y = 1: temperatures (6, 2)
    std::vector<double> teacher2{3.0, 1.0, -1.0};
    auto pair2 = dynamic_temperatures(teacher2, student, tau);
    CHECK(std::abs(pair2.t_teacher - 6.0) < 1e-12);
    CHECK(std::abs(pair2.t_student - 2.0) < 1e-12);

    // cancelling maxima: x = 1, y = -1 falls back to (tau, tau)
    std::vector<double> pos{1.0, 0.0};
    std::vector<double> neg{-1.0, -2.0};
    auto degen = dynamic_temperatures(pos, neg, tau);
    CHECK(degen.degenerate);
    CHECK(degen.t_teacher == 4.0);
    CHECK(degen.t_student == 4.0);
    CHECK(degen.delta == 0.0);

    CHECK_THROWS_AS(dynamic_temperatures(pos, pos, 0.0), std::domain_error);
    CHECK_THROWS_AS(dynamic_temperatures(pos, pos, -1.0), std::domain_error);
}

TEST_CASE("temperature identities on random non-degenerate rows") {
    Rng rng(21);
    int checked = 0;
    while (checked < 10000) {
        std::size_t k = 2 + rng.uniform_index(15);
        std::vector<double> u(k), v(k);
        for (auto &e : u)
            e = rng.uniform(-10.0, 10.0);
        for (auto &e : v)
            e = rng.uniform(-10.0, 10.0);
        double tau = rng.uniform(0.5, 8.0);
        double x = row_max(u).value;
        double y = row_max(v).value;
        if (x <= 0.0 || y <= 0.0 || x + y <= 1e-6)
            continue;
        auto pair = dynamic_temperatures(u, v, tau);
        REQUIRE(!pair.degenerate);
        CHECK(std::abs(pair.t_teacher + pair.t_student - 2.0 * tau) < 1e-12);
        CHECK(pair.t_teacher == tau + pair.delta);
        CHECK(pair.t_student == tau - pair.delta);
        CHECK(pair.t_teacher > 0.0);
        CHECK(pair.t_student > 0.0);
        // equalized-maximum identity: x / t_teacher == y / t_student
        CHECK(std::abs(x / pair.t_teacher - y / pair.t_student) < 1e-12);
        // sign agreement
        double dsign = pair.t_teacher - pair.t_student;
        if (x > y)
            CHECK(dsign > 0.0);
        if (x < y)
            CHECK(dsign < 0.0);
        // scale covariance: scaling both rows leaves the pair unchanged
        double c = rng.uniform(0.1, 10.0);
        std::vector<double> cu(u), cv(v);
        for (auto &e : cu)
            e *= c;
        for (auto &e : cv)
            e *= c;
        auto scaled = dynamic_temperatures(cu, cv, tau);
        CHECK(std::abs(scaled.t_teacher - pair.t_teacher) < 1e-12 * std::max(1.0, pair.t_teacher));
        CHECK(std::abs(scaled.t_student - pair.t_student) < 1e-12 * std::max(1.0, pair.t_student));
        ++checked;
    }
}

TEST_CASE("logsumexp difference bound over random temperature pairs") {
    Rng rng(22);
    for (int trial = 0; trial < 10000; ++trial) {
        std::size_t k = 2 + rng.uniform_index(63);
        std::vector<double> u(k), v(k), su(k), sv(k);
        for (std::size_t i = 0; i < k; ++i) {
            u[i] = rng.uniform(-10.0, 10.0);
            v[i] = rng.uniform(-10.0, 10.0);
        }
        double t1 = rng.uniform(0.1, 10.0);
        double t2 = rng.uniform(0.1, 10.0);
        double bound = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            su[i] = u[i] / t1;
            sv[i] = v[i] / t2;
            bound = std::max(bound, std::abs(su[i] - sv[i]));
        }
        double diff = std::abs(logsumexp(su) - logsumexp(sv));
        CHECK(diff >= 0.0);
        CHECK(diff <= bound + 1e-9);
    }
}

TEST_CASE("dtkd_loss identical logits give zero") {
    Rng rng(23);
    Matrix logits = random_positive_max_logits(rng, 6, 5);
    auto [loss, temps] = dtkd_loss(logits, logits, plain_config());
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-15));
    for (const auto &t : temps) {
        CHECK(t.t_teacher == doctest::Approx(4.0).epsilon(1e-15));
        CHECK(t.t_student == doctest::Approx(4.0).epsilon(1e-15));
    }
}

TEST_CASE("dtkd_loss single sample against step-by-step oracle") {
    auto teacher = Matrix::from_rows({{2.0, 1.0, 0.0}});
    auto student = Matrix::from_rows({{1.0, 0.5, 0.0}});
    auto [loss, temps] = dtkd_loss(teacher, student, plain_config(4.0));
    long double want = oracle_dtkd_sample(teacher.row(0), student.row(0), 4.0L, 1e-6L);
    CHECK(std::abs(loss - static_cast<double>(want)) < 1e-10);
    CHECK(std::abs(temps[0].t_teacher - 16.0 / 3.0) < 1e-12);
}

TEST_CASE("dtkd_loss batch equals mean of single-sample losses") {
    Rng rng(24);
    Matrix teacher = random_positive_max_logits(rng, 9, 6);
    Matrix student = random_positive_max_logits(rng, 9, 6);
    auto cfg = plain_config(3.0);
    auto [batch_loss, temps] = dtkd_loss(teacher, student, cfg);
    double acc = 0.0;
    for (std::size_t i = 0; i < teacher.rows(); ++i) {
        Matrix t1(1, teacher.cols()), s1(1, student.cols());
        for (std::size_t j = 0; j < teacher.cols(); ++j) {
            t1(0, j) = teacher(i, j);
            s1(0, j) = student(i, j);
        }
        acc += dtkd_loss(t1, s1, cfg).first;
    }
    CHECK(std::abs(batch_loss - acc / static_cast<double>(teacher.rows())) < 1e-12);
}

TEST_CASE("dtkd_loss against oracle on random batches") {
    Rng rng(25);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 1 + rng.uniform_index(8);
        std::size_t k = 2 + rng.uniform_index(9);
        Matrix teacher = random_logits(rng, n, k);
        Matrix student = random_logits(rng, n, k);
        double tau = rng.uniform(0.5, 8.0);
        auto cfg = plain_config(tau);
        auto [loss, temps] = dtkd_loss(teacher, student, cfg);
        long double want = 0.0L;
        for (std::size_t i = 0; i < n; ++i)
            want += oracle_dtkd_sample(teacher.row(i), student.row(i), tau, 1e-6L);
        want /= static_cast<long double>(n);
        CHECK(std::abs(loss - static_cast<double>(want)) < 1e-10);
    }
}

TEST_CASE("kd_loss_fixed basics and oracle") {
    Rng rng(26);
    Matrix logits = random_logits(rng, 5, 4);
    CHECK(kd_loss_fixed(logits, logits, 4.0) == 0.0);
    CHECK_THROWS_AS(kd_loss_fixed(logits, logits, 0.0), std::domain_error);

    Matrix teacher = random_logits(rng, 7, 5);
    Matrix student = random_logits(rng, 7, 5);
    for (double tau : {1.0, 2.5, 4.0}) {
        double got = kd_loss_fixed(teacher, student, tau);
        long double want = 0.0L;
        for (std::size_t i = 0; i < teacher.rows(); ++i)
            want += oracle_asym_sample(teacher.row(i), student.row(i), tau, tau);
        want /= static_cast<long double>(teacher.rows());
        CHECK(std::abs(got - static_cast<double>(want)) < 1e-10);
    }
}

TEST_CASE("kd_loss_asymmetric reduction and oracle") {
    Rng rng(27);
    Matrix teacher = random_logits(rng, 6, 5);
    Matrix student = random_logits(rng, 6, 5);

    // equal temperatures reduce to the fixed loss exactly
    CHECK(kd_loss_asymmetric(teacher, student, 4.0, 4.0) == kd_loss_fixed(teacher, student, 4.0));

    // the (4.5, 0.8) baseline pair against the oracle
    double got = kd_loss_asymmetric(teacher, student, 4.5, 0.8);
    long double want = 0.0L;
    for (std::size_t i = 0; i < teacher.rows(); ++i)
        want += oracle_asym_sample(teacher.row(i), student.row(i), 4.5L, 0.8L);
    want /= static_cast<long double>(teacher.rows());
    CHECK(std::abs(got - static_cast<double>(want)) < 1e-10);

    // identical logits at unequal temperatures still differ after softening
    CHECK(kd_loss_asymmetric(teacher, teacher, 4.5, 0.8) > 0.0);

    CHECK_THROWS_AS(kd_loss_asymmetric(teacher, student, -1.0, 2.0), std::domain_error);
}

TEST_CASE("combined_loss weight semantics") {
    Rng rng(28);
    Matrix teacher = random_positive_max_logits(rng, 8, 6);
    Matrix student = random_positive_max_logits(rng, 8, 6);
    std::vector<int> labels;
    for (std::size_t i = 0; i < teacher.rows(); ++i)
        labels.push_back(static_cast<int>(rng.uniform_index(6)));

    DistillConfig ce_only = plain_config();
    ce_only.alpha = 0.0;
    ce_only.beta = 0.0;
    ce_only.gamma = 1.0;
    auto bd = combined_loss(teacher, student, labels, ce_only);
    double mean_ce = 0.0;
    for (std::size_t i = 0; i < student.rows(); ++i)
        mean_ce += dtkd::numkit::cross_entropy(student.row(i), labels[i]);
    mean_ce /= static_cast<double>(student.rows());
    CHECK(bd.total == bd.ce_term);
    CHECK(std::abs(bd.ce_term - mean_ce) < 1e-12);

    DistillConfig no_ce = plain_config();
    no_ce.gamma = 0.0;
    auto zero = combined_loss(teacher, teacher, labels, no_ce);
    CHECK(zero.total == doctest::Approx(0.0).epsilon(1e-15));

    // totals are affine in the weights
    DistillConfig w1 = plain_config();
    w1.alpha = 3.0;
    w1.beta = 1.0;
    w1.gamma = 1.0;
    DistillConfig w2 = w1;
    w2.alpha *= 2.0;
    w2.beta *= 2.0;
    w2.gamma *= 2.0;
    auto b1 = combined_loss(teacher, student, labels, w1);
    auto b2 = combined_loss(teacher, student, labels, w2);
    CHECK(std::abs(b2.total - 2.0 * b1.total) < 1e-10);
    CHECK(b1.dtkd_term == b2.dtkd_term);
    CHECK(std::abs(b1.total - (w1.alpha * b1.dtkd_term + w1.beta * b1.fixed_kl_term +
                               w1.gamma * b1.ce_term)) < 1e-10);
    CHECK(b1.dtkd_term >= 0.0);
    CHECK(b1.fixed_kl_term >= 0.0);
    CHECK(b1.per_sample_temps.size() == teacher.rows());
}

TEST_CASE("dkd_terms basics") {
    Rng rng(29);
    Matrix logits = random_positive_max_logits(rng, 1, 6);
    auto same = dkd_terms(logits.row(0), logits.row(0), 4.0, 4.0, 2);
    CHECK(same.tckd == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(same.nckd == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(same.teacher_target_prob > 0.0);
    CHECK(same.teacher_target_prob < 1.0);

    // saturated target probability is a domain error
    auto saturated = Matrix::from_rows({{60.0, 0.0, 0.0}});
    CHECK_THROWS_AS(dkd_terms(saturated.row(0), saturated.row(0), 1.0, 1.0, 0),
                    std::domain_error);
    CHECK_THROWS_AS(dkd_terms(logits.row(0), logits.row(0), 0.0, 1.0, 0), std::domain_error);
    CHECK_THROWS_AS(dkd_terms(logits.row(0), logits.row(0), 1.0, 1.0, 9), std::domain_error);
}

TEST_CASE("dkd decomposition identity on random rows") {
    Rng rng(30);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t k = 3 + rng.uniform_index(10);
        std::vector<double> u(k), v(k);
        for (auto &e : u)
            e = rng.uniform(-4.0, 4.0);
        for (auto &e : v)
            e = rng.uniform(-4.0, 4.0);
        double t1 = rng.uniform(0.5, 6.0);
        double t2 = rng.uniform(0.5, 6.0);
        std::size_t target = rng.uniform_index(k);
        auto terms = dkd_terms(u, v, t1, t2, target);
        auto p = dtkd::numkit::tempered_softmax(u, t1);
        auto q = dtkd::numkit::tempered_softmax(v, t2);
        double full = dtkd::numkit::kl_div(p, q);
        double recombined = terms.tckd + (1.0 - terms.teacher_target_prob) * terms.nckd;
        CHECK(std::abs(full - recombined) < 1e-10);
        CHECK(terms.tckd >= 0.0);
        CHECK(terms.nckd >= 0.0);
    }
}

TEST_CASE("dkd toggles select terms without changing their values") {
    Rng rng(31);
    Matrix teacher = random_positive_max_logits(rng, 5, 6);
    Matrix student = random_positive_max_logits(rng, 5, 6);
    std::vector<int> labels;
    for (std::size_t i = 0; i < teacher.rows(); ++i)
        labels.push_back(static_cast<int>(rng.uniform_index(6)));

    DistillConfig both = plain_config();
    both.dkd_mode = DkdMode::kFixedTemp;
    DistillConfig tckd_only = both;
    tckd_only.nckd_enabled = false;
    DistillConfig nckd_only = both;
    nckd_only.tckd_enabled = false;

    double tau = both.tau_ref;
    double want_tckd = 0.0, want_nckd = 0.0;
    for (std::size_t i = 0; i < teacher.rows(); ++i) {
        auto terms = dkd_terms(teacher.row(i), student.row(i), tau, tau,
                               static_cast<std::size_t>(labels[i]));
        want_tckd += tau * tau * terms.tckd;
        want_nckd += tau * tau * terms.nckd;
    }
    want_tckd /= static_cast<double>(teacher.rows());
    want_nckd /= static_cast<double>(teacher.rows());

    auto b_both = combined_loss(teacher, student, labels, both);
    auto b_t = combined_loss(teacher, student, labels, tckd_only);
    auto b_n = combined_loss(teacher, student, labels, nckd_only);
    CHECK(std::abs(b_t.dtkd_term - want_tckd) < 1e-12);
    CHECK(std::abs(b_n.dtkd_term - want_nckd) < 1e-12);
    CHECK(std::abs(b_both.dtkd_term - (want_tckd + want_nckd)) < 1e-12);

    DistillConfig empty = both;
    empty.tckd_enabled = false;
    empty.nckd_enabled = false;
    CHECK_THROWS_AS(combined_loss(teacher, student, labels, empty), std::domain_error);
}

TEST_CASE("combined_loss rejects bad shapes and labels") {
    Rng rng(32);
    Matrix teacher = random_logits(rng, 4, 5);
    Matrix student = random_logits(rng, 4, 5);
    Matrix narrow = random_logits(rng, 4, 3);
    std::vector<int> labels{0, 1, 2, 3};
    CHECK_THROWS_AS(combined_loss(teacher, narrow, labels, plain_config()), std::domain_error);
    std::vector<int> bad_labels{0, 1, 2, 7};
    CHECK_THROWS_AS(combined_loss(teacher, student, bad_labels, plain_config()),
                    std::domain_error);
    std::vector<int> short_labels{0, 1};
    CHECK_THROWS_AS(combined_loss(teacher, student, short_labels, plain_config()),
                    std::domain_error);
}
