#include "dtkd/analysis.hpp"

#include "dtkd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace dtkd::analysis {

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

BucketTemps bucket_temps(const Matrix &teacher_logits, const Matrix &student_logits,
                         double tau_ref, const std::vector<std::size_t> &indices) {
    BucketTemps out;
    out.size = indices.size();
    for (std::size_t i : indices) {
        auto pair = distill::dynamic_temperatures(teacher_logits.row(i), student_logits.row(i),
                                                  tau_ref);
        out.mean_t_teacher += pair.t_teacher;
        out.mean_t_student += pair.t_student;
        if (pair.degenerate)
            ++out.degenerate_count;
    }
    if (!indices.empty()) {
        out.mean_t_teacher /= static_cast<double>(indices.size());
        out.mean_t_student /= static_cast<double>(indices.size());
    }
    return out;
}

double bucket_accuracy(const Matrix &logits, const data::DatasetSplit &split,
                       const std::vector<std::size_t> &indices) {
    if (indices.empty())
        return 0.0;
    std::size_t correct = 0;
    for (std::size_t i : indices)
        if (numkit::row_max(logits.row(i)).index == static_cast<std::size_t>(split.labels[i]))
            ++correct;
    return static_cast<double>(correct) / static_cast<double>(indices.size());
}

} // namespace

DifficultyBuckets bucket_difficulty(const Matrix &teacher_logits) {
    numkit::validate_logits(teacher_logits, "bucket_difficulty");
    const std::size_t n = teacher_logits.rows();
    if (n < 3)
        throw std::domain_error("bucket_difficulty: need at least three samples");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> maxima(n);
    for (std::size_t i = 0; i < n; ++i)
        maxima[i] = numkit::row_max(teacher_logits.row(i)).value;
    // ascending by teacher max; stable keeps original index order on ties
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return maxima[a] < maxima[b]; });

    std::size_t edge = static_cast<std::size_t>(std::lround(0.33 * static_cast<double>(n)));
    edge = std::max<std::size_t>(1, std::min(edge, (n - 1) / 2));

    DifficultyBuckets buckets;
    buckets.hard.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(edge));
    buckets.middle.assign(order.begin() + static_cast<std::ptrdiff_t>(edge),
                          order.end() - static_cast<std::ptrdiff_t>(edge));
    buckets.easy.assign(order.end() - static_cast<std::ptrdiff_t>(edge), order.end());
    return buckets;
}

BucketTemperatureReport bucket_temperature_report(const Matrix &teacher_logits,
                                                  const Matrix &student_logits, double tau_ref,
                                                  const DifficultyBuckets &buckets) {
    if (teacher_logits.rows() != student_logits.rows() ||
        teacher_logits.cols() != student_logits.cols())
        throw std::domain_error("bucket_temperature_report: shape mismatch");
    BucketTemperatureReport report;
    report.easy = bucket_temps(teacher_logits, student_logits, tau_ref, buckets.easy);
    report.middle = bucket_temps(teacher_logits, student_logits, tau_ref, buckets.middle);
    report.hard = bucket_temps(teacher_logits, student_logits, tau_ref, buckets.hard);
    return report;
}

BucketAccuracyReport bucket_accuracy_report(const net::MlpParams &params,
                                            const data::DatasetSplit &split,
                                            const DifficultyBuckets &buckets) {
    Matrix logits = net::forward(params, split.features);
    BucketAccuracyReport report;
    report.easy = bucket_accuracy(logits, split, buckets.easy);
    report.middle = bucket_accuracy(logits, split, buckets.middle);
    report.hard = bucket_accuracy(logits, split, buckets.hard);
    return report;
}

double confidence_summary(const net::MlpParams &params, const data::DatasetSplit &split,
                          std::size_t sample_count, std::uint64_t seed) {
    const std::size_t n = split.features.rows();
    if (sample_count == 0 || sample_count > n)
        throw std::domain_error("confidence_summary: sample_count out of range");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    numkit::Rng rng(seed);
    rng.shuffle(perm);

    Matrix logits = net::forward(params, split.features);
    double sum = 0.0;
    for (std::size_t i = 0; i < sample_count; ++i) {
        auto probs = numkit::tempered_softmax(logits.row(perm[i]), 1.0);
        sum += numkit::row_max(probs).value;
    }
    return sum / static_cast<double>(sample_count);
}

std::filesystem::path report_path(const std::filesystem::path &out_dir,
                                  const std::string &experiment_id,
                                  const std::string &analysis_name) {
    return out_dir / (experiment_id + "__" + analysis_name + ".csv");
}

void write_bucket_temperature_report(const BucketTemperatureReport &report,
                                     const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("analysis: cannot open for writing: " + path.string());
    out << "bucket,size,mean_t_teacher,mean_t_student,degenerate_count\n";
    auto row = [&](const char *name, const BucketTemps &b) {
        out << name << ',' << b.size << ',' << format_double(b.mean_t_teacher) << ','
            << format_double(b.mean_t_student) << ',' << b.degenerate_count << '\n';
    };
    row("hard", report.hard);
    row("middle", report.middle);
    row("easy", report.easy);
    out.flush();
}

void write_bucket_accuracy_report(const BucketAccuracyReport &report, const std::string &model,
                                  const std::filesystem::path &path, bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out)
        throw std::runtime_error("analysis: cannot open for writing: " + path.string());
    if (!append)
        out << "model,hard,middle,easy\n";
    out << model << ',' << format_double(report.hard) << ',' << format_double(report.middle)
        << ',' << format_double(report.easy) << '\n';
    out.flush();
}

void write_confidence_report(const std::vector<std::pair<std::string, double>> &rows,
                             const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("analysis: cannot open for writing: " + path.string());
    out << "model,mean_max_prob\n";
    for (const auto &[model, value] : rows)
        out << model << ',' << format_double(value) << '\n';
    out.flush();
}

} // namespace dtkd::analysis
