#pragma once

// Post-hoc analyses over stored checkpoints and datasets: difficulty
// bucketing by teacher confidence, per-bucket temperature behavior, and
// prediction-confidence summaries.

#include "dtkd/data.hpp"
#include "dtkd/net.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace dtkd::analysis {

using numkit::Matrix;

/// Disjoint index partition of the test set; sizes round(0.33 N) on the hard
/// and easy ends, the middle absorbs the remainder. Lowest teacher confidence
/// means hardest.
struct DifficultyBuckets {
    std::vector<std::size_t> easy;
    std::vector<std::size_t> middle;
    std::vector<std::size_t> hard;
};

/// Sorts samples ascending by the signed row max of the teacher logits
/// (ties keep original index order) and splits thirds.
DifficultyBuckets bucket_difficulty(const Matrix &teacher_logits);

struct BucketTemps {
    double mean_t_teacher = 0.0;
    double mean_t_student = 0.0;
    std::size_t degenerate_count = 0;
    std::size_t size = 0;
};

struct BucketTemperatureReport {
    BucketTemps easy;
    BucketTemps middle;
    BucketTemps hard;
};

/// Mean dynamic temperatures per bucket plus degenerate counts.
BucketTemperatureReport bucket_temperature_report(const Matrix &teacher_logits,
                                                  const Matrix &student_logits, double tau_ref,
                                                  const DifficultyBuckets &buckets);

struct BucketAccuracyReport {
    double easy = 0.0;
    double middle = 0.0;
    double hard = 0.0;
};

/// Top-1 accuracy within each bucket.
BucketAccuracyReport bucket_accuracy_report(const net::MlpParams &params,
                                            const data::DatasetSplit &split,
                                            const DifficultyBuckets &buckets);

/// Mean over a seeded sample of max_i softmax(logits)_i at temperature 1.
double confidence_summary(const net::MlpParams &params, const data::DatasetSplit &split,
                          std::size_t sample_count, std::uint64_t seed);

/// Report writers: delimited text with a one-line header; file names derive
/// from (experiment id, analysis name).
std::filesystem::path report_path(const std::filesystem::path &out_dir,
                                  const std::string &experiment_id,
                                  const std::string &analysis_name);
void write_bucket_temperature_report(const BucketTemperatureReport &report,
                                     const std::filesystem::path &path);
void write_bucket_accuracy_report(const BucketAccuracyReport &report, const std::string &model,
                                  const std::filesystem::path &path, bool append = false);
void write_confidence_report(const std::vector<std::pair<std::string, double>> &rows,
                             const std::filesystem::path &path);

} // namespace dtkd::analysis
