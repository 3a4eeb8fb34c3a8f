#pragma once

// Numerically stable scalar/row primitives and a seeded, platform-stable
// pseudo-random source. Everything downstream builds on these.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace dtkd::numkit {

/// Dense row-major matrix of doubles. Rows are samples, columns are classes
/// when used as a logit matrix.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    double &operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const {
        return {values_.data() + r * cols_, cols_};
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }
    double *data() { return values_.data(); }
    const double *data() const { return values_.data(); }

    bool all_finite() const;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// A logit matrix is a Matrix with at least one row, at least two classes and
/// only finite entries. Throws std::domain_error when violated.
void validate_logits(const Matrix &m, const char *what);

/// Checks that a row is a probability distribution: entries >= 0 and summing
/// to 1 within 1e-9. Throws std::domain_error when violated.
void validate_probability_row(std::span<const double> row, const char *what);

/// Seeded pseudo-random source. The engine is std::mt19937_64 (bit-exact by
/// the standard) and every derived draw below uses fixed arithmetic, so
/// identical seeds give identical streams on every platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; the spare value is cached so draws come
    /// in a fixed order.
    double normal();

    /// Unbiased integer in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n);

    template <class T> void shuffle(std::vector<T> &v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives an independent stream seed from (seed, stream). splitmix64 mixing.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// log(sum_i exp(row_i)) with max-shift stabilization; no intermediate
/// overflows for |row_i| up to 1e6.
double logsumexp(std::span<const double> row);

/// softmax(row / temperature). Output sums to 1 within 1e-12.
std::vector<double> tempered_softmax(std::span<const double> row, double temperature);

/// KL divergence sum_i p_i * ln(p_i / q_i), with the convention 0 * ln 0 = 0.
/// Both rows must be normalized; q_i = 0 with p_i > 0 is a domain error.
double kl_div(std::span<const double> p, std::span<const double> q);

/// -ln(softmax(row)_label) at temperature 1.
double cross_entropy(std::span<const double> row, std::size_t label);

struct RowMax {
    double value;
    std::size_t index; // first occurrence on ties
};

/// Signed maximum of the row and the index of its first occurrence.
RowMax row_max(std::span<const double> row);

} // namespace dtkd::numkit
