#pragma once

// Experiment orchestration: teacher pretraining, distillation runs for every
// method variant, the sweep/ablation grids, and the metrics files they emit.

#include "dtkd/data.hpp"
#include "dtkd/distill.hpp"
#include "dtkd/net.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dtkd::harness {

using numkit::Matrix;

enum class Method { kBaselineCe, kKdFixed, kKdAsymmetric, kDtkd, kDkdFixed, kDkdDtkd };

std::string method_name(Method method);
Method parse_method(const std::string &name); // throws std::domain_error

struct DataConfig {
    int n_classes = 10;
    int dim = 32;
    int n_train = 5000;
    int n_test = 1000;
    double class_spread = 3.0;
    double overlap = 1.0;
    std::uint64_t seed = 7;
    // optional DTKS files; the splits are generated from the fields above
    // when the paths are empty
    std::string train_path;
    std::string test_path;
};

struct ExperimentConfig {
    std::string id = "dtkd_default";
    Method method = Method::kDtkd;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    DataConfig data;
    std::vector<std::size_t> teacher_hidden = {256, 256};
    std::vector<std::size_t> student_hidden = {32};
    net::TrainSchedule schedule;
    distill::DistillConfig distill;
    // fixed temperatures of the asymmetric baseline
    double asym_t_teacher = 4.5;
    double asym_t_student = 0.8;

    net::MlpSpec teacher_spec() const;
    net::MlpSpec student_spec() const;
    void validate() const; // throws std::domain_error
};

/// One row of the metrics file. Loss terms are per-epoch means over samples;
/// the temperature means cover every training sample of the epoch.
struct MetricsRecord {
    std::size_t epoch = 0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double loss_total = 0.0;
    double loss_dtkd = 0.0;
    double loss_kl = 0.0;
    double loss_ce = 0.0;
    double mean_t_teacher = 0.0;
    double mean_t_student = 0.0;
    double degenerate_fraction = 0.0;
};

/// Delimited text, one row per epoch, fixed column set.
void write_metrics(const std::vector<MetricsRecord> &metrics,
                   const std::filesystem::path &path);
std::vector<MetricsRecord> read_metrics(const std::filesystem::path &path);

/// Datasets resolved once and teacher logits precomputed once; every run of a
/// sweep shares them. The teacher is frozen throughout, so its per-sample
/// training logits never change.
struct Experiment {
    ExperimentConfig config;
    data::DatasetSplit train;
    data::DatasetSplit test;
    std::optional<net::MlpParams> teacher;
    Matrix teacher_train_logits;

    static Experiment prepare(const ExperimentConfig &config);
    static Experiment prepare(const ExperimentConfig &config, net::MlpParams teacher);
};

struct RunResult {
    net::MlpParams params;
    std::vector<MetricsRecord> metrics;
};

/// Trains the teacher spec with cross-entropy only.
RunResult train_teacher(const Experiment &experiment, std::uint64_t seed);

/// One distillation run of the student spec under experiment.config.method.
RunResult distill_student(const Experiment &experiment, std::uint64_t seed);

/// Same, with a per-run config override (sweeps vary tau/weights/method while
/// sharing the experiment's datasets and teacher).
RunResult distill_student(const Experiment &experiment, const ExperimentConfig &config,
                          std::uint64_t seed);

/// Top-1 accuracy; argmax ties break to the first index.
double evaluate_accuracy(const net::MlpParams &params, const data::DatasetSplit &split);

/// One cell of a sweep table.
struct SweepRun {
    std::string method;
    double tau = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    bool tckd = true;
    bool nckd = true;
    std::uint64_t seed = 0;
    double final_test_accuracy = 0.0;
    std::string note;
};

/// One distillation per tau per seed for both the fixed-temperature baseline
/// and the dynamic method.
std::vector<SweepRun> sweep_reference_temperature(const Experiment &experiment,
                                                  const std::vector<double> &taus,
                                                  std::size_t jobs);

/// Decomposed-loss runs with only the enabled terms, under fixed and dynamic
/// temperatures, per-term weights 1.0 including cross-entropy.
std::vector<SweepRun> ablate_tckd_nckd(const Experiment &experiment,
                                       const std::vector<std::pair<bool, bool>> &flag_sets,
                                       std::size_t jobs);

/// Accuracy per (alpha, beta) cell with gamma fixed at 1.
std::vector<SweepRun> sweep_loss_weights(const Experiment &experiment,
                                         const std::vector<double> &alphas,
                                         const std::vector<double> &betas, std::size_t jobs);

void write_sweep_runs(const std::vector<SweepRun> &runs, const std::filesystem::path &path);
/// Pivot table: method rows, one column per tau, cells are seed means.
void write_temperature_table(const std::vector<SweepRun> &runs, const std::vector<double> &taus,
                             const std::filesystem::path &path);
/// Pivot table: beta rows, one column per alpha.
void write_weight_grid(const std::vector<SweepRun> &runs, const std::vector<double> &alphas,
                       const std::vector<double> &betas, const std::filesystem::path &path);
/// Term rows (both / tckd_only / nckd_only) against fixed and dynamic columns.
void write_ablation_table(const std::vector<SweepRun> &runs,
                          const std::filesystem::path &path);

/// Median |mean_t_teacher - mean_t_student| over the first and last tenth of
/// the logged epochs.
struct TrendSummary {
    double median_gap_first = 0.0;
    double median_gap_last = 0.0;
};
TrendSummary temperature_trend(const std::vector<MetricsRecord> &metrics);

} // namespace dtkd::harness
