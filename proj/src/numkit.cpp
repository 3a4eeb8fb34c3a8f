#include "dtkd/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dtkd::numkit {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m;
    m.rows_ = rows.size();
    m.cols_ = rows.size() == 0 ? 0 : rows.begin()->size();
    m.values_.reserve(m.rows_ * m.cols_);
    for (const auto &r : rows) {
        if (r.size() != m.cols_)
            throw std::domain_error("Matrix::from_rows: ragged rows");
        m.values_.insert(m.values_.end(), r.begin(), r.end());
    }
    return m;
}

bool Matrix::all_finite() const {
    for (double v : values_)
        if (!std::isfinite(v))
            return false;
    return true;
}

void validate_logits(const Matrix &m, const char *what) {
    if (m.rows() < 1)
        throw std::domain_error(std::string(what) + ": need at least one row");
    if (m.cols() < 2)
        throw std::domain_error(std::string(what) + ": need at least two classes");
    if (!m.all_finite())
        throw std::domain_error(std::string(what) + ": non-finite entry");
}

void validate_probability_row(std::span<const double> row, const char *what) {
    double sum = 0.0;
    for (double v : row) {
        if (!(v >= 0.0))
            throw std::domain_error(std::string(what) + ": negative probability entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::domain_error(std::string(what) + ": row does not sum to 1");
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 1.0 - uniform(); // (0, 1], keeps the log finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0)
        throw std::domain_error("Rng::uniform_index: empty range");
    const std::uint64_t bound = n;
    const std::uint64_t threshold = (0 - bound) % bound; // 2^64 mod n
    for (;;) {
        std::uint64_t x = next_u64();
        if (x >= threshold)
            return static_cast<std::size_t>(x % bound);
    }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double logsumexp(std::span<const double> row) {
    if (row.empty())
        throw std::domain_error("logsumexp: empty row");
    double max = -std::numeric_limits<double>::infinity();
    for (double v : row) {
        if (!std::isfinite(v))
            throw std::domain_error("logsumexp: non-finite entry");
        max = std::max(max, v);
    }
    double sum = 0.0;
    for (double v : row)
        sum += std::exp(v - max);
    return max + std::log(sum);
}

std::vector<double> tempered_softmax(std::span<const double> row, double temperature) {
    if (!(temperature > 0.0))
        throw std::domain_error("tempered_softmax: temperature must be positive");
    if (row.empty())
        throw std::domain_error("tempered_softmax: empty row");
    std::vector<double> out(row.size());
    double max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (!std::isfinite(row[i]))
            throw std::domain_error("tempered_softmax: non-finite entry");
        out[i] = row[i] / temperature;
        max = std::max(max, out[i]);
    }
    double sum = 0.0;
    for (double &v : out) {
        v = std::exp(v - max);
        sum += v;
    }
    for (double &v : out)
        v /= sum;
    return out;
}

double kl_div(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size())
        throw std::domain_error("kl_div: length mismatch");
    validate_probability_row(p, "kl_div: p");
    validate_probability_row(q, "kl_div: q");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0)
            continue; // 0 * ln 0 = 0
        if (q[i] == 0.0)
            throw std::domain_error("kl_div: q has a zero where p is positive");
        sum += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(sum, 0.0); // rounding can dip a hair below zero
}

double cross_entropy(std::span<const double> row, std::size_t label) {
    if (label >= row.size())
        throw std::domain_error("cross_entropy: label out of range");
    return logsumexp(row) - row[label];
}

RowMax row_max(std::span<const double> row) {
    if (row.empty())
        throw std::domain_error("row_max: empty row");
    RowMax best{row[0], 0};
    for (std::size_t i = 1; i < row.size(); ++i) {
        if (!std::isfinite(row[i]))
            throw std::domain_error("row_max: non-finite entry");
        if (row[i] > best.value) {
            best.value = row[i];
            best.index = i;
        }
    }
    if (!std::isfinite(best.value))
        throw std::domain_error("row_max: non-finite entry");
    return best;
}

} // namespace dtkd::numkit
