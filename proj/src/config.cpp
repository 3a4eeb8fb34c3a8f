#include "dtkd/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace dtkd::harness {

namespace {

std::string trim(const std::string &s) {
    std::size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos)
        return "";
    std::size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_value(const std::string &key, const std::string &value,
                            std::size_t line) {
    throw ConfigError("config: bad value '" + value + "' for key '" + key + "' at line " +
                          std::to_string(line),
                      line);
}

double to_double(const std::string &key, const std::string &value, std::size_t line) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size())
            bad_value(key, value, line);
        return v;
    } catch (const ConfigError &) {
        throw;
    } catch (...) {
        bad_value(key, value, line);
    }
}

std::uint64_t to_u64(const std::string &key, const std::string &value, std::size_t line) {
    try {
        std::size_t used = 0;
        if (!value.empty() && value[0] == '-')
            bad_value(key, value, line);
        std::uint64_t v = std::stoull(value, &used);
        if (used != value.size())
            bad_value(key, value, line);
        return v;
    } catch (const ConfigError &) {
        throw;
    } catch (...) {
        bad_value(key, value, line);
    }
}

int to_int(const std::string &key, const std::string &value, std::size_t line) {
    try {
        std::size_t used = 0;
        int v = std::stoi(value, &used);
        if (used != value.size())
            bad_value(key, value, line);
        return v;
    } catch (const ConfigError &) {
        throw;
    } catch (...) {
        bad_value(key, value, line);
    }
}

bool to_bool(const std::string &key, const std::string &value, std::size_t line) {
    if (value == "true" || value == "1")
        return true;
    if (value == "false" || value == "0")
        return false;
    bad_value(key, value, line);
}

std::vector<std::string> split_list(const std::string &value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

template <class T, class Fn>
std::vector<T> to_list(const std::string &key, const std::string &value, std::size_t line,
                       Fn convert) {
    std::vector<T> out;
    for (const auto &item : split_list(value))
        out.push_back(convert(key, item, line));
    if (out.empty())
        bad_value(key, value, line);
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

template <class T> std::string join(const std::vector<T> &values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0)
            out += ",";
        if constexpr (std::is_same_v<T, double>)
            out += format_double(values[i]);
        else
            out += std::to_string(values[i]);
    }
    return out;
}

} // namespace

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig parse_config(const std::string &text) {
    ExperimentConfig cfg = default_config();
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#')
            continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: missing '=' at line " + std::to_string(line_no), line_no);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config: empty key at line " + std::to_string(line_no), line_no);

        if (key == "experiment.id") {
            cfg.id = value;
        } else if (key == "method") {
            try {
                cfg.method = parse_method(value);
            } catch (const std::domain_error &) {
                bad_value(key, value, line_no);
            }
        } else if (key == "seeds") {
            cfg.seeds = to_list<std::uint64_t>(key, value, line_no, to_u64);
        } else if (key == "data.n_classes") {
            cfg.data.n_classes = to_int(key, value, line_no);
        } else if (key == "data.dim") {
            cfg.data.dim = to_int(key, value, line_no);
        } else if (key == "data.n_train") {
            cfg.data.n_train = to_int(key, value, line_no);
        } else if (key == "data.n_test") {
            cfg.data.n_test = to_int(key, value, line_no);
        } else if (key == "data.class_spread") {
            cfg.data.class_spread = to_double(key, value, line_no);
        } else if (key == "data.overlap") {
            cfg.data.overlap = to_double(key, value, line_no);
        } else if (key == "data.seed") {
            cfg.data.seed = to_u64(key, value, line_no);
        } else if (key == "data.train_path") {
            cfg.data.train_path = value;
        } else if (key == "data.test_path") {
            cfg.data.test_path = value;
        } else if (key == "teacher.hidden") {
            cfg.teacher_hidden = to_list<std::size_t>(
                key, value, line_no, [](const auto &k, const auto &v, std::size_t l) {
                    return static_cast<std::size_t>(to_u64(k, v, l));
                });
        } else if (key == "student.hidden") {
            cfg.student_hidden = to_list<std::size_t>(
                key, value, line_no, [](const auto &k, const auto &v, std::size_t l) {
                    return static_cast<std::size_t>(to_u64(k, v, l));
                });
        } else if (key == "schedule.base_lr") {
            cfg.schedule.base_lr = to_double(key, value, line_no);
        } else if (key == "schedule.momentum") {
            cfg.schedule.momentum = to_double(key, value, line_no);
        } else if (key == "schedule.weight_decay") {
            cfg.schedule.weight_decay = to_double(key, value, line_no);
        } else if (key == "schedule.epochs") {
            cfg.schedule.epochs = static_cast<std::size_t>(to_u64(key, value, line_no));
        } else if (key == "schedule.warmup_epochs") {
            cfg.schedule.warmup_epochs = static_cast<std::size_t>(to_u64(key, value, line_no));
        } else if (key == "schedule.milestones") {
            if (value == "none")
                cfg.schedule.decay_milestones.clear();
            else
                cfg.schedule.decay_milestones = to_list<std::size_t>(
                    key, value, line_no, [](const auto &k, const auto &v, std::size_t l) {
                        return static_cast<std::size_t>(to_u64(k, v, l));
                    });
        } else if (key == "schedule.decay_factor") {
            cfg.schedule.decay_factor = to_double(key, value, line_no);
        } else if (key == "schedule.batch_size") {
            cfg.schedule.batch_size = static_cast<std::size_t>(to_u64(key, value, line_no));
        } else if (key == "schedule.seed") {
            cfg.schedule.seed = to_u64(key, value, line_no);
        } else if (key == "distill.tau_ref") {
            cfg.distill.tau_ref = to_double(key, value, line_no);
        } else if (key == "distill.alpha") {
            cfg.distill.alpha = to_double(key, value, line_no);
        } else if (key == "distill.beta") {
            cfg.distill.beta = to_double(key, value, line_no);
        } else if (key == "distill.gamma") {
            cfg.distill.gamma = to_double(key, value, line_no);
        } else if (key == "distill.temp_grad_mode") {
            if (value == "flow")
                cfg.distill.temp_grad_mode = distill::TempGradMode::kFlow;
            else if (value == "detach")
                cfg.distill.temp_grad_mode = distill::TempGradMode::kDetach;
            else
                bad_value(key, value, line_no);
        } else if (key == "distill.dkd_mode") {
            if (value == "off")
                cfg.distill.dkd_mode = distill::DkdMode::kOff;
            else if (value == "fixed_temp")
                cfg.distill.dkd_mode = distill::DkdMode::kFixedTemp;
            else if (value == "dtkd_temp")
                cfg.distill.dkd_mode = distill::DkdMode::kDtkdTemp;
            else
                bad_value(key, value, line_no);
        } else if (key == "distill.tckd") {
            cfg.distill.tckd_enabled = to_bool(key, value, line_no);
        } else if (key == "distill.nckd") {
            cfg.distill.nckd_enabled = to_bool(key, value, line_no);
        } else if (key == "distill.use_abs_max") {
            cfg.distill.use_abs_max = to_bool(key, value, line_no);
        } else if (key == "distill.epsilon_floor") {
            cfg.distill.epsilon_floor = to_double(key, value, line_no);
        } else if (key == "asym.t_teacher") {
            cfg.asym_t_teacher = to_double(key, value, line_no);
        } else if (key == "asym.t_student") {
            cfg.asym_t_student = to_double(key, value, line_no);
        } else {
            throw ConfigError("config: unknown key '" + key + "' at line " +
                                  std::to_string(line_no),
                              line_no);
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config: cannot open: " + path.string(), 0);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

void write_config(const ExperimentConfig &cfg, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("config: cannot open for writing: " + path.string());
    out << "experiment.id = " << cfg.id << '\n';
    out << "method = " << method_name(cfg.method) << '\n';
    out << "seeds = " << join(cfg.seeds) << '\n';
    out << '\n';
    out << "data.n_classes = " << cfg.data.n_classes << '\n';
    out << "data.dim = " << cfg.data.dim << '\n';
    out << "data.n_train = " << cfg.data.n_train << '\n';
    out << "data.n_test = " << cfg.data.n_test << '\n';
    out << "data.class_spread = " << format_double(cfg.data.class_spread) << '\n';
    out << "data.overlap = " << format_double(cfg.data.overlap) << '\n';
    out << "data.seed = " << cfg.data.seed << '\n';
    if (!cfg.data.train_path.empty())
        out << "data.train_path = " << cfg.data.train_path << '\n';
    if (!cfg.data.test_path.empty())
        out << "data.test_path = " << cfg.data.test_path << '\n';
    out << '\n';
    out << "teacher.hidden = " << join(cfg.teacher_hidden) << '\n';
    out << "student.hidden = " << join(cfg.student_hidden) << '\n';
    out << '\n';
    out << "schedule.base_lr = " << format_double(cfg.schedule.base_lr) << '\n';
    out << "schedule.momentum = " << format_double(cfg.schedule.momentum) << '\n';
    out << "schedule.weight_decay = " << format_double(cfg.schedule.weight_decay) << '\n';
    out << "schedule.epochs = " << cfg.schedule.epochs << '\n';
    out << "schedule.warmup_epochs = " << cfg.schedule.warmup_epochs << '\n';
    out << "schedule.milestones = "
        << (cfg.schedule.decay_milestones.empty() ? "none" : join(cfg.schedule.decay_milestones))
        << '\n';
    out << "schedule.decay_factor = " << format_double(cfg.schedule.decay_factor) << '\n';
    out << "schedule.batch_size = " << cfg.schedule.batch_size << '\n';
    out << "schedule.seed = " << cfg.schedule.seed << '\n';
    out << '\n';
    out << "distill.tau_ref = " << format_double(cfg.distill.tau_ref) << '\n';
    out << "distill.alpha = " << format_double(cfg.distill.alpha) << '\n';
    out << "distill.beta = " << format_double(cfg.distill.beta) << '\n';
    out << "distill.gamma = " << format_double(cfg.distill.gamma) << '\n';
    out << "distill.temp_grad_mode = "
        << (cfg.distill.temp_grad_mode == distill::TempGradMode::kFlow ? "flow" : "detach")
        << '\n';
    const char *dkd = cfg.distill.dkd_mode == distill::DkdMode::kOff          ? "off"
                      : cfg.distill.dkd_mode == distill::DkdMode::kFixedTemp ? "fixed_temp"
                                                                             : "dtkd_temp";
    out << "distill.dkd_mode = " << dkd << '\n';
    out << "distill.tckd = " << (cfg.distill.tckd_enabled ? "true" : "false") << '\n';
    out << "distill.nckd = " << (cfg.distill.nckd_enabled ? "true" : "false") << '\n';
    out << "distill.use_abs_max = " << (cfg.distill.use_abs_max ? "true" : "false") << '\n';
    out << "distill.epsilon_floor = " << format_double(cfg.distill.epsilon_floor) << '\n';
    out << '\n';
    out << "asym.t_teacher = " << format_double(cfg.asym_t_teacher) << '\n';
    out << "asym.t_student = " << format_double(cfg.asym_t_student) << '\n';
    out.flush();
    if (!out)
        throw std::runtime_error("config: write failed: " + path.string());
}

} // namespace dtkd::harness
