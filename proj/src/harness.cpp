#include "dtkd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dtkd::harness {

namespace {

Matrix gather_rows(const Matrix &src, const std::vector<std::size_t> &indices) {
    Matrix out(indices.size(), src.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto from = src.row(indices[i]);
        auto to = out.row(i);
        std::copy(from.begin(), from.end(), to.begin());
    }
    return out;
}

std::size_t count_correct(const Matrix &logits, const std::vector<int> &labels) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < logits.rows(); ++i)
        if (numkit::row_max(logits.row(i)).index == static_cast<std::size_t>(labels[i]))
            ++correct;
    return correct;
}

// Per-method distillation config actually fed to combined_loss.
distill::DistillConfig effective_distill_config(const ExperimentConfig &cfg) {
    distill::DistillConfig d = cfg.distill;
    switch (cfg.method) {
    case Method::kBaselineCe:
    case Method::kKdAsymmetric:
        break; // handled outside combined_loss
    case Method::kKdFixed:
        d.alpha = 0.0;
        d.dkd_mode = distill::DkdMode::kOff;
        break;
    case Method::kDtkd:
        d.dkd_mode = distill::DkdMode::kOff;
        break;
    case Method::kDkdFixed:
        d.dkd_mode = distill::DkdMode::kFixedTemp;
        d.beta = 0.0;
        break;
    case Method::kDkdDtkd:
        d.dkd_mode = distill::DkdMode::kDtkdTemp;
        d.beta = 0.0;
        break;
    }
    return d;
}

struct BatchEval {
    distill::LossBreakdown breakdown;
    Matrix grad;
};

BatchEval eval_batch(const ExperimentConfig &cfg, const Matrix *teacher_logits,
                     const Matrix &student_logits, const std::vector<int> &labels) {
    BatchEval ev;
    const std::size_t n = student_logits.rows();

    if (cfg.method == Method::kBaselineCe || teacher_logits == nullptr) {
        double ce = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            ce += numkit::cross_entropy(student_logits.row(i),
                                        static_cast<std::size_t>(labels[i]));
        ev.breakdown.ce_term = ce / static_cast<double>(n);
        ev.breakdown.total = ev.breakdown.ce_term;
        ev.grad = distill::ce_logit_gradient(student_logits, labels);
        if (teacher_logits != nullptr) {
            ev.breakdown.per_sample_temps.reserve(n);
            for (std::size_t i = 0; i < n; ++i)
                ev.breakdown.per_sample_temps.push_back(distill::dynamic_temperatures(
                    teacher_logits->row(i), student_logits.row(i), cfg.distill.tau_ref,
                    cfg.distill.epsilon_floor, cfg.distill.use_abs_max));
        }
        return ev;
    }

    if (cfg.method == Method::kKdAsymmetric) {
        double asym = distill::kd_loss_asymmetric(*teacher_logits, student_logits,
                                                  cfg.asym_t_teacher, cfg.asym_t_student);
        double ce = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            ce += numkit::cross_entropy(student_logits.row(i),
                                        static_cast<std::size_t>(labels[i]));
        ce /= static_cast<double>(n);
        ev.breakdown.fixed_kl_term = asym;
        ev.breakdown.ce_term = ce;
        ev.breakdown.total = cfg.distill.beta * asym + cfg.distill.gamma * ce;
        ev.breakdown.per_sample_temps.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            ev.breakdown.per_sample_temps.push_back(distill::dynamic_temperatures(
                teacher_logits->row(i), student_logits.row(i), cfg.distill.tau_ref,
                cfg.distill.epsilon_floor, cfg.distill.use_abs_max));

        Matrix ce_grad = distill::ce_logit_gradient(student_logits, labels);
        Matrix kl_grad = distill::asymmetric_kl_logit_gradient(
            *teacher_logits, student_logits, cfg.asym_t_teacher, cfg.asym_t_student);
        ev.grad = Matrix(n, student_logits.cols());
        for (std::size_t i = 0; i < ev.grad.size(); ++i)
            ev.grad.data()[i] = cfg.distill.gamma * ce_grad.data()[i] +
                                cfg.distill.beta * kl_grad.data()[i];
        return ev;
    }

    distill::DistillConfig d = effective_distill_config(cfg);
    ev.breakdown = distill::combined_loss(*teacher_logits, student_logits, labels, d);
    ev.grad = distill::student_logit_gradient(*teacher_logits, student_logits, labels, d);
    return ev;
}

RunResult run_training(const Experiment &experiment, const ExperimentConfig &cfg,
                       const net::MlpSpec &spec, bool use_teacher, std::uint64_t seed) {
    spec.validate();
    if (spec.input_dim() != experiment.train.features.cols())
        throw std::domain_error("run: model input dim does not match dataset");
    if (spec.output_dim() != static_cast<std::size_t>(experiment.train.n_classes))
        throw std::domain_error("run: model class count does not match dataset");

    numkit::Rng rng(seed);
    RunResult result{net::MlpParams::init(spec, rng), {}};
    if (cfg.schedule.epochs == 0)
        return result; // nothing to train; parameters equal the initialization
    cfg.schedule.validate();

    net::Velocity velocity = net::Gradients::zeros_like(result.params);
    const std::size_t n_train = experiment.train.features.rows();

    for (std::size_t epoch = 0; epoch < cfg.schedule.epochs; ++epoch) {
        const double lr = net::lr_at(cfg.schedule, epoch);
        auto parts = data::batches(experiment.train, cfg.schedule.batch_size, seed, epoch);

        std::size_t correct = 0;
        double sum_total = 0.0, sum_dtkd = 0.0, sum_kl = 0.0, sum_ce = 0.0;
        double sum_tt = 0.0, sum_ts = 0.0;
        std::size_t temp_samples = 0, degenerate = 0;

        for (const auto &batch : parts) {
            net::ForwardCache cache;
            Matrix logits = net::forward(result.params, batch.features, &cache);
            Matrix teacher_batch;
            if (use_teacher)
                teacher_batch = gather_rows(experiment.teacher_train_logits, batch.indices);
            BatchEval ev = eval_batch(cfg, use_teacher ? &teacher_batch : nullptr, logits,
                                      batch.labels);

            const double bn = static_cast<double>(batch.labels.size());
            correct += count_correct(logits, batch.labels);
            sum_total += ev.breakdown.total * bn;
            sum_dtkd += ev.breakdown.dtkd_term * bn;
            sum_kl += ev.breakdown.fixed_kl_term * bn;
            sum_ce += ev.breakdown.ce_term * bn;
            for (const auto &pair : ev.breakdown.per_sample_temps) {
                sum_tt += pair.t_teacher;
                sum_ts += pair.t_student;
                ++temp_samples;
                if (pair.degenerate)
                    ++degenerate;
            }

            net::Gradients grads = net::backward(result.params, cache, ev.grad);
            net::sgd_step(result.params, grads, cfg.schedule, velocity, lr);
        }

        MetricsRecord rec;
        rec.epoch = epoch;
        rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(n_train);
        rec.test_accuracy = evaluate_accuracy(result.params, experiment.test);
        rec.loss_total = sum_total / static_cast<double>(n_train);
        rec.loss_dtkd = sum_dtkd / static_cast<double>(n_train);
        rec.loss_kl = sum_kl / static_cast<double>(n_train);
        rec.loss_ce = sum_ce / static_cast<double>(n_train);
        if (temp_samples > 0) {
            rec.mean_t_teacher = sum_tt / static_cast<double>(temp_samples);
            rec.mean_t_student = sum_ts / static_cast<double>(temp_samples);
            rec.degenerate_fraction =
                static_cast<double>(degenerate) / static_cast<double>(temp_samples);
        }
        result.metrics.push_back(rec);
    }
    return result;
}

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n == 0)
        return 0.0;
    if (n % 2 == 1)
        return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void parallel_tasks(std::size_t count, std::size_t jobs,
                    const std::function<void(std::size_t)> &task) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i)
            task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= count)
                    return;
                task(i);
            }
        });
    for (auto &th : pool)
        th.join();
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

} // namespace

std::string method_name(Method method) {
    switch (method) {
    case Method::kBaselineCe:
        return "baseline_ce";
    case Method::kKdFixed:
        return "kd_fixed";
    case Method::kKdAsymmetric:
        return "kd_asymmetric";
    case Method::kDtkd:
        return "dtkd";
    case Method::kDkdFixed:
        return "dkd_fixed";
    case Method::kDkdDtkd:
        return "dkd_dtkd";
    }
    return "unknown";
}

Method parse_method(const std::string &name) {
    for (Method m : {Method::kBaselineCe, Method::kKdFixed, Method::kKdAsymmetric, Method::kDtkd,
                     Method::kDkdFixed, Method::kDkdDtkd})
        if (method_name(m) == name)
            return m;
    throw std::domain_error("unknown method '" + name + "'");
}

net::MlpSpec ExperimentConfig::teacher_spec() const {
    net::MlpSpec spec;
    spec.layer_sizes.push_back(static_cast<std::size_t>(data.dim));
    spec.layer_sizes.insert(spec.layer_sizes.end(), teacher_hidden.begin(), teacher_hidden.end());
    spec.layer_sizes.push_back(static_cast<std::size_t>(data.n_classes));
    return spec;
}

net::MlpSpec ExperimentConfig::student_spec() const {
    net::MlpSpec spec;
    spec.layer_sizes.push_back(static_cast<std::size_t>(data.dim));
    spec.layer_sizes.insert(spec.layer_sizes.end(), student_hidden.begin(), student_hidden.end());
    spec.layer_sizes.push_back(static_cast<std::size_t>(data.n_classes));
    return spec;
}

void ExperimentConfig::validate() const {
    if (id.empty())
        throw std::domain_error("ExperimentConfig: empty experiment id");
    if (data.n_classes < 2 || data.dim < 2 || data.n_train < data.n_classes || data.n_test < 1)
        throw std::domain_error("ExperimentConfig: invalid dataset shape");
    if (!(data.class_spread > 0.0) || data.overlap < 0.0)
        throw std::domain_error("ExperimentConfig: invalid spread/overlap");
    if (seeds.empty())
        throw std::domain_error("ExperimentConfig: need at least one seed");
    teacher_spec().validate();
    student_spec().validate();
    if (schedule.epochs > 0)
        schedule.validate();
    distill.validate();
    if (method == Method::kKdAsymmetric && (!(asym_t_teacher > 0.0) || !(asym_t_student > 0.0)))
        throw std::domain_error("ExperimentConfig: asymmetric method needs positive temperatures");
}

void write_metrics(const std::vector<MetricsRecord> &metrics,
                   const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("metrics: cannot open for writing: " + path.string());
    out << "epoch,train_acc,test_acc,loss_total,loss_dtkd,loss_kl,loss_ce,"
           "mean_t_teacher,mean_t_student,degenerate_frac\n";
    for (const auto &r : metrics) {
        out << r.epoch << ',' << format_double(r.train_accuracy) << ','
            << format_double(r.test_accuracy) << ',' << format_double(r.loss_total) << ','
            << format_double(r.loss_dtkd) << ',' << format_double(r.loss_kl) << ','
            << format_double(r.loss_ce) << ',' << format_double(r.mean_t_teacher) << ','
            << format_double(r.mean_t_student) << ',' << format_double(r.degenerate_fraction)
            << '\n';
    }
    out.flush();
    if (!out)
        throw std::runtime_error("metrics: write failed: " + path.string());
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("metrics: cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("metrics: empty file: " + path.string());
    std::vector<MetricsRecord> out;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        MetricsRecord r;
        std::istringstream ss(line);
        std::string field;
        auto next = [&](const char *what) {
            if (!std::getline(ss, field, ','))
                throw std::runtime_error("metrics: missing field " + std::string(what) + ": " +
                                         path.string());
            return field;
        };
        r.epoch = static_cast<std::size_t>(std::stoull(next("epoch")));
        r.train_accuracy = std::stod(next("train_acc"));
        r.test_accuracy = std::stod(next("test_acc"));
        r.loss_total = std::stod(next("loss_total"));
        r.loss_dtkd = std::stod(next("loss_dtkd"));
        r.loss_kl = std::stod(next("loss_kl"));
        r.loss_ce = std::stod(next("loss_ce"));
        r.mean_t_teacher = std::stod(next("mean_t_teacher"));
        r.mean_t_student = std::stod(next("mean_t_student"));
        r.degenerate_fraction = std::stod(next("degenerate_frac"));
        out.push_back(r);
    }
    return out;
}

Experiment Experiment::prepare(const ExperimentConfig &config) {
    config.validate();
    Experiment exp;
    exp.config = config;
    if (!config.data.train_path.empty() || !config.data.test_path.empty()) {
        if (config.data.train_path.empty() || config.data.test_path.empty())
            throw std::domain_error("Experiment: need both train and test paths");
        exp.train = data::load_dataset(config.data.train_path);
        exp.test = data::load_dataset(config.data.test_path);
        if (exp.train.n_classes != config.data.n_classes ||
            exp.train.features.cols() != static_cast<std::size_t>(config.data.dim))
            throw std::domain_error("Experiment: dataset file does not match config");
    } else {
        auto pair = data::gen_synthetic(config.data.n_classes, config.data.dim,
                                        config.data.n_train, config.data.n_test,
                                        config.data.class_spread, config.data.overlap,
                                        config.data.seed);
        exp.train = std::move(pair.first);
        exp.test = std::move(pair.second);
    }
    return exp;
}

Experiment Experiment::prepare(const ExperimentConfig &config, net::MlpParams teacher) {
    Experiment exp = prepare(config);
    teacher.spec.validate();
    if (teacher.spec.output_dim() != static_cast<std::size_t>(exp.train.n_classes))
        throw std::domain_error("Experiment: teacher class count does not match dataset");
    if (teacher.spec.input_dim() != exp.train.features.cols())
        throw std::domain_error("Experiment: teacher input dim does not match dataset");
    exp.teacher = std::move(teacher);
    exp.teacher_train_logits = net::forward(*exp.teacher, exp.train.features);
    return exp;
}

RunResult train_teacher(const Experiment &experiment, std::uint64_t seed) {
    ExperimentConfig cfg = experiment.config;
    cfg.method = Method::kBaselineCe;
    return run_training(experiment, cfg, cfg.teacher_spec(), false, seed);
}

RunResult distill_student(const Experiment &experiment, std::uint64_t seed) {
    return distill_student(experiment, experiment.config, seed);
}

RunResult distill_student(const Experiment &experiment, const ExperimentConfig &config,
                          std::uint64_t seed) {
    config.validate();
    bool needs_teacher = config.method != Method::kBaselineCe;
    if (needs_teacher && !experiment.teacher.has_value())
        throw std::domain_error("distill: experiment has no teacher checkpoint");
    return run_training(experiment, config, config.student_spec(),
                        needs_teacher && experiment.teacher.has_value(), seed);
}

double evaluate_accuracy(const net::MlpParams &params, const data::DatasetSplit &split) {
    Matrix logits = net::forward(params, split.features);
    return static_cast<double>(count_correct(logits, split.labels)) /
           static_cast<double>(split.labels.size());
}

std::vector<SweepRun> sweep_reference_temperature(const Experiment &experiment,
                                                  const std::vector<double> &taus,
                                                  std::size_t jobs) {
    if (taus.empty())
        throw std::domain_error("sweep_reference_temperature: empty tau list");
    for (double tau : taus)
        if (!(tau > 0.0))
            throw std::domain_error("sweep_reference_temperature: tau must be positive");

    std::vector<ExperimentConfig> configs;
    std::vector<SweepRun> runs;
    for (Method m : {Method::kKdFixed, Method::kDtkd})
        for (double tau : taus)
            for (std::uint64_t seed : experiment.config.seeds) {
                ExperimentConfig cfg = experiment.config;
                cfg.method = m;
                cfg.distill.tau_ref = tau;
                configs.push_back(cfg);
                SweepRun run;
                run.method = method_name(m);
                run.tau = tau;
                run.alpha = cfg.distill.alpha;
                run.beta = cfg.distill.beta;
                run.seed = seed;
                runs.push_back(run);
            }
    parallel_tasks(configs.size(), jobs, [&](std::size_t i) {
        RunResult result = distill_student(experiment, configs[i], runs[i].seed);
        runs[i].final_test_accuracy = result.metrics.back().test_accuracy;
    });
    return runs;
}

std::vector<SweepRun> ablate_tckd_nckd(const Experiment &experiment,
                                       const std::vector<std::pair<bool, bool>> &flag_sets,
                                       std::size_t jobs) {
    if (flag_sets.empty())
        throw std::domain_error("ablate_tckd_nckd: empty flag list");
    for (auto [tckd, nckd] : flag_sets)
        if (!tckd && !nckd)
            throw std::domain_error("ablate_tckd_nckd: a flag set enables neither term");

    std::vector<ExperimentConfig> configs;
    std::vector<SweepRun> runs;
    for (auto [tckd, nckd] : flag_sets)
        for (Method m : {Method::kDkdFixed, Method::kDkdDtkd})
            for (std::uint64_t seed : experiment.config.seeds) {
                ExperimentConfig cfg = experiment.config;
                cfg.method = m;
                // every per-term weight at 1.0, cross-entropy included
                cfg.distill.alpha = 1.0;
                cfg.distill.beta = 0.0;
                cfg.distill.gamma = 1.0;
                cfg.distill.tckd_enabled = tckd;
                cfg.distill.nckd_enabled = nckd;
                configs.push_back(cfg);
                SweepRun run;
                run.method = method_name(m);
                run.tau = cfg.distill.tau_ref;
                run.alpha = 1.0;
                run.beta = 0.0;
                run.tckd = tckd;
                run.nckd = nckd;
                run.seed = seed;
                if (cfg.distill.gamma == 0.0 && !tckd)
                    run.note = "no_target_signal";
                runs.push_back(run);
            }
    parallel_tasks(configs.size(), jobs, [&](std::size_t i) {
        RunResult result = distill_student(experiment, configs[i], runs[i].seed);
        runs[i].final_test_accuracy = result.metrics.back().test_accuracy;
    });
    return runs;
}

std::vector<SweepRun> sweep_loss_weights(const Experiment &experiment,
                                         const std::vector<double> &alphas,
                                         const std::vector<double> &betas, std::size_t jobs) {
    if (alphas.empty() || betas.empty())
        throw std::domain_error("sweep_loss_weights: empty grid");

    std::vector<ExperimentConfig> configs;
    std::vector<SweepRun> runs;
    for (double beta : betas)
        for (double alpha : alphas)
            for (std::uint64_t seed : experiment.config.seeds) {
                ExperimentConfig cfg = experiment.config;
                cfg.method = Method::kDtkd;
                cfg.distill.alpha = alpha;
                cfg.distill.beta = beta;
                cfg.distill.gamma = 1.0;
                configs.push_back(cfg);
                SweepRun run;
                run.method = method_name(Method::kDtkd);
                run.tau = cfg.distill.tau_ref;
                run.alpha = alpha;
                run.beta = beta;
                run.seed = seed;
                runs.push_back(run);
            }
    parallel_tasks(configs.size(), jobs, [&](std::size_t i) {
        RunResult result = distill_student(experiment, configs[i], runs[i].seed);
        runs[i].final_test_accuracy = result.metrics.back().test_accuracy;
    });
    return runs;
}

void write_sweep_runs(const std::vector<SweepRun> &runs, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("sweep: cannot open for writing: " + path.string());
    out << "method,tau,alpha,beta,tckd,nckd,seed,final_test_acc,note\n";
    for (const auto &r : runs)
        out << r.method << ',' << format_double(r.tau) << ',' << format_double(r.alpha) << ','
            << format_double(r.beta) << ',' << (r.tckd ? 1 : 0) << ',' << (r.nckd ? 1 : 0) << ','
            << r.seed << ',' << format_double(r.final_test_accuracy) << ',' << r.note << '\n';
    out.flush();
    if (!out)
        throw std::runtime_error("sweep: write failed: " + path.string());
}

namespace {

double mean_accuracy(const std::vector<SweepRun> &runs,
                     const std::function<bool(const SweepRun &)> &filter) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto &r : runs)
        if (filter(r)) {
            sum += r.final_test_accuracy;
            ++count;
        }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

} // namespace

void write_temperature_table(const std::vector<SweepRun> &runs, const std::vector<double> &taus,
                             const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("sweep: cannot open for writing: " + path.string());
    out << "method";
    for (double tau : taus)
        out << ",T=" << format_double(tau);
    out << '\n';
    for (const std::string method : {"kd_fixed", "dtkd"}) {
        out << method;
        for (double tau : taus)
            out << ',' << format_double(mean_accuracy(runs, [&](const SweepRun &r) {
                     return r.method == method && r.tau == tau;
                 }));
        out << '\n';
    }
    out.flush();
}

void write_weight_grid(const std::vector<SweepRun> &runs, const std::vector<double> &alphas,
                       const std::vector<double> &betas, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("sweep: cannot open for writing: " + path.string());
    out << "beta\\alpha";
    for (double alpha : alphas)
        out << ',' << format_double(alpha);
    out << '\n';
    for (double beta : betas) {
        out << format_double(beta);
        for (double alpha : alphas)
            out << ',' << format_double(mean_accuracy(runs, [&](const SweepRun &r) {
                     return r.alpha == alpha && r.beta == beta;
                 }));
        out << '\n';
    }
    out.flush();
}

void write_ablation_table(const std::vector<SweepRun> &runs,
                          const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("sweep: cannot open for writing: " + path.string());
    out << "terms,fixed_temp,dtkd_temp,note\n";
    struct RowSpec {
        const char *label;
        bool tckd;
        bool nckd;
    };
    for (RowSpec row : {RowSpec{"tckd+nckd", true, true}, RowSpec{"tckd_only", true, false},
                        RowSpec{"nckd_only", false, true}}) {
        bool present = false;
        std::string note;
        for (const auto &r : runs)
            if (r.tckd == row.tckd && r.nckd == row.nckd) {
                present = true;
                if (!r.note.empty())
                    note = r.note;
            }
        if (!present)
            continue;
        double fixed = mean_accuracy(runs, [&](const SweepRun &r) {
            return r.tckd == row.tckd && r.nckd == row.nckd && r.method == "dkd_fixed";
        });
        double dynamic = mean_accuracy(runs, [&](const SweepRun &r) {
            return r.tckd == row.tckd && r.nckd == row.nckd && r.method == "dkd_dtkd";
        });
        out << row.label << ',' << format_double(fixed) << ',' << format_double(dynamic) << ','
            << note << '\n';
    }
    out.flush();
}

TrendSummary temperature_trend(const std::vector<MetricsRecord> &metrics) {
    if (metrics.empty())
        throw std::domain_error("temperature_trend: no metrics");
    std::size_t window = std::max<std::size_t>(1, (metrics.size() + 9) / 10);
    std::vector<double> first, last;
    for (std::size_t i = 0; i < window; ++i)
        first.push_back(std::abs(metrics[i].mean_t_teacher - metrics[i].mean_t_student));
    for (std::size_t i = metrics.size() - window; i < metrics.size(); ++i)
        last.push_back(std::abs(metrics[i].mean_t_teacher - metrics[i].mean_t_student));
    return {median(first), median(last)};
}

} // namespace dtkd::harness
