#include "dtkd/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace dtkd::net {

namespace {

Matrix relu(const Matrix &z) {
    Matrix h = z;
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = 0; j < h.cols(); ++j)
            h(i, j) = std::max(h(i, j), 0.0);
    return h;
}

// out = x * W + b, with W stored (in_dim x out_dim). The k-middle loop order
// keeps the inner accumulation contiguous and vectorizable.
Matrix affine(const Matrix &x, const Matrix &w, const std::vector<double> &b) {
    const std::size_t n = x.rows();
    const std::size_t in = w.rows();
    const std::size_t out = w.cols();
    Matrix z(n, out);
    for (std::size_t i = 0; i < n; ++i) {
        auto zi = z.row(i);
        std::copy(b.begin(), b.end(), zi.begin());
        auto xi = x.row(i);
        for (std::size_t k = 0; k < in; ++k) {
            double a = xi[k];
            if (a == 0.0)
                continue;
            auto wk = w.row(k);
            for (std::size_t j = 0; j < out; ++j)
                zi[j] += a * wk[j];
        }
    }
    return z;
}

void write_bytes(std::ofstream &out, const void *data, std::size_t count,
                 const std::filesystem::path &path) {
    out.write(static_cast<const char *>(data), static_cast<std::streamsize>(count));
    if (!out)
        throw std::runtime_error("checkpoint: write failed: " + path.string());
}

void write_u16(std::ofstream &out, std::uint16_t v, const std::filesystem::path &path) {
    unsigned char buf[2] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>(v >> 8)};
    write_bytes(out, buf, 2, path);
}

void write_u32(std::ofstream &out, std::uint32_t v, const std::filesystem::path &path) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i)
        buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    write_bytes(out, buf, 4, path);
}

void write_f32(std::ofstream &out, float v, const std::filesystem::path &path) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits, path);
}

struct Reader {
    std::ifstream in;
    std::filesystem::path path;

    void read(void *data, std::size_t count, const char *what) {
        in.read(static_cast<char *>(data), static_cast<std::streamsize>(count));
        if (!in)
            throw std::runtime_error("checkpoint: truncated while reading " + std::string(what) +
                                     ": " + path.string());
    }
    std::uint16_t u16(const char *what) {
        unsigned char buf[2];
        read(buf, 2, what);
        return static_cast<std::uint16_t>(buf[0] | (buf[1] << 8));
    }
    std::uint32_t u32(const char *what) {
        unsigned char buf[4];
        read(buf, 4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
        return v;
    }
    float f32(const char *what) {
        std::uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

constexpr std::uint16_t kCheckpointVersion = 1;

} // namespace

void MlpSpec::validate() const {
    if (layer_sizes.size() < 2)
        throw std::domain_error("MlpSpec: need at least input and output sizes");
    for (std::size_t s : layer_sizes)
        if (s == 0)
            throw std::domain_error("MlpSpec: zero layer size");
}

MlpParams MlpParams::init(const MlpSpec &spec, numkit::Rng &rng) {
    spec.validate();
    MlpParams params;
    params.spec = spec;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        std::size_t fan_in = spec.layer_sizes[l];
        std::size_t fan_out = spec.layer_sizes[l + 1];
        double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Matrix w(fan_in, fan_out);
        for (std::size_t r = 0; r < fan_in; ++r)
            for (std::size_t c = 0; c < fan_out; ++c)
                w(r, c) = rng.uniform(-bound, bound);
        params.weights.push_back(std::move(w));
        params.biases.emplace_back(fan_out, 0.0);
    }
    return params;
}

bool MlpParams::all_finite() const {
    for (const auto &w : weights)
        if (!w.all_finite())
            return false;
    for (const auto &b : biases)
        for (double v : b)
            if (!std::isfinite(v))
                return false;
    return true;
}

Gradients Gradients::zeros_like(const MlpParams &params) {
    Gradients g;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        g.weights.emplace_back(params.weights[l].rows(), params.weights[l].cols());
        g.biases.emplace_back(params.biases[l].size(), 0.0);
    }
    return g;
}

void TrainSchedule::validate() const {
    if (!(base_lr > 0.0))
        throw std::domain_error("TrainSchedule: base_lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::domain_error("TrainSchedule: momentum must be in [0, 1)");
    if (weight_decay < 0.0)
        throw std::domain_error("TrainSchedule: weight_decay must be non-negative");
    if (epochs == 0)
        throw std::domain_error("TrainSchedule: epochs must be positive");
    if (warmup_epochs >= epochs)
        throw std::domain_error("TrainSchedule: warmup_epochs must be below epochs");
    if (!(decay_factor > 0.0) || !(decay_factor < 1.0))
        throw std::domain_error("TrainSchedule: decay_factor must be in (0, 1)");
    if (batch_size == 0)
        throw std::domain_error("TrainSchedule: batch_size must be positive");
    for (std::size_t i = 0; i < decay_milestones.size(); ++i) {
        if (decay_milestones[i] >= epochs)
            throw std::domain_error("TrainSchedule: milestone beyond last epoch");
        if (i > 0 && decay_milestones[i] <= decay_milestones[i - 1])
            throw std::domain_error("TrainSchedule: milestones must be strictly increasing");
    }
}

Matrix forward(const MlpParams &params, const Matrix &batch, ForwardCache *cache) {
    params.spec.validate();
    if (batch.cols() != params.spec.input_dim())
        throw std::domain_error("forward: feature dimension does not match spec");
    if (cache) {
        cache->input = batch;
        cache->pre_activations.clear();
    }
    Matrix h = batch;
    const std::size_t layers = params.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix z = affine(h, params.weights[l], params.biases[l]);
        if (cache)
            cache->pre_activations.push_back(z);
        if (l + 1 < layers)
            h = relu(z);
        else
            h = std::move(z);
    }
    return h;
}

Gradients backward(const MlpParams &params, const ForwardCache &cache,
                   const Matrix &logit_gradient) {
    const std::size_t layers = params.weights.size();
    if (cache.pre_activations.size() != layers)
        throw std::domain_error("backward: cache does not match parameter stack");
    if (logit_gradient.rows() != cache.input.rows() ||
        logit_gradient.cols() != params.spec.output_dim())
        throw std::domain_error("backward: logit gradient shape mismatch");

    Gradients grads = Gradients::zeros_like(params);
    const std::size_t n = cache.input.rows();
    Matrix delta = logit_gradient;

    for (std::size_t l = layers; l-- > 0;) {
        const Matrix &w = params.weights[l];
        Matrix h_prev = l == 0 ? cache.input : relu(cache.pre_activations[l - 1]);
        if (h_prev.cols() != w.rows())
            throw std::domain_error("backward: cache does not match parameter stack");

        Matrix &dw = grads.weights[l];
        std::vector<double> &db = grads.biases[l];
        for (std::size_t i = 0; i < n; ++i) {
            auto di = delta.row(i);
            auto hi = h_prev.row(i);
            for (std::size_t k = 0; k < w.rows(); ++k) {
                double a = hi[k];
                if (a == 0.0)
                    continue;
                auto dwk = dw.row(k);
                for (std::size_t j = 0; j < w.cols(); ++j)
                    dwk[j] += a * di[j];
            }
            for (std::size_t j = 0; j < w.cols(); ++j)
                db[j] += di[j];
        }

        if (l == 0)
            break;
        const Matrix &z_prev = cache.pre_activations[l - 1];
        Matrix next(n, w.rows());
        for (std::size_t i = 0; i < n; ++i) {
            auto di = delta.row(i);
            auto zi = z_prev.row(i);
            auto ni = next.row(i);
            for (std::size_t k = 0; k < w.rows(); ++k) {
                if (zi[k] <= 0.0) {
                    ni[k] = 0.0; // ReLU mask; the zero branch also fixes the subgradient at 0
                    continue;
                }
                auto wk = w.row(k);
                double acc = 0.0;
                for (std::size_t j = 0; j < w.cols(); ++j)
                    acc += di[j] * wk[j];
                ni[k] = acc;
            }
        }
        delta = std::move(next);
    }
    return grads;
}

void sgd_step(MlpParams &params, const Gradients &grads, const TrainSchedule &schedule,
              Velocity &velocity, double lr_now) {
    if (grads.weights.size() != params.weights.size() ||
        velocity.weights.size() != params.weights.size())
        throw std::domain_error("sgd_step: gradient/velocity stack mismatch");
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        Matrix &w = params.weights[l];
        const Matrix &gw = grads.weights[l];
        Matrix &vw = velocity.weights[l];
        if (gw.rows() != w.rows() || gw.cols() != w.cols())
            throw std::domain_error("sgd_step: weight gradient shape mismatch");
        for (std::size_t i = 0; i < w.size(); ++i) {
            vw.data()[i] = schedule.momentum * vw.data()[i] + gw.data()[i] +
                           schedule.weight_decay * w.data()[i];
            w.data()[i] -= lr_now * vw.data()[i];
        }
        auto &b = params.biases[l];
        const auto &gb = grads.biases[l];
        auto &vb = velocity.biases[l];
        if (gb.size() != b.size())
            throw std::domain_error("sgd_step: bias gradient shape mismatch");
        for (std::size_t i = 0; i < b.size(); ++i) {
            vb[i] = schedule.momentum * vb[i] + gb[i] + schedule.weight_decay * b[i];
            b[i] -= lr_now * vb[i];
        }
    }
}

double lr_at(const TrainSchedule &schedule, std::size_t epoch) {
    schedule.validate();
    if (epoch >= schedule.epochs)
        throw std::domain_error("lr_at: epoch out of range");
    if (epoch < schedule.warmup_epochs)
        return schedule.base_lr * static_cast<double>(epoch + 1) /
               static_cast<double>(schedule.warmup_epochs);
    double lr = schedule.base_lr;
    for (std::size_t m : schedule.decay_milestones)
        if (m <= epoch)
            lr *= schedule.decay_factor;
    return lr;
}

void store_checkpoint(const MlpParams &params, const std::filesystem::path &path) {
    params.spec.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("checkpoint: cannot open for writing: " + path.string());
    write_bytes(out, "DTKD", 4, path);
    write_u16(out, kCheckpointVersion, path);
    write_u32(out, static_cast<std::uint32_t>(params.spec.layer_sizes.size()), path);
    for (std::size_t dim : params.spec.layer_sizes)
        write_u32(out, static_cast<std::uint32_t>(dim), path);
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        const Matrix &w = params.weights[l];
        for (std::size_t i = 0; i < w.size(); ++i)
            write_f32(out, static_cast<float>(w.data()[i]), path);
        for (double b : params.biases[l])
            write_f32(out, static_cast<float>(b), path);
    }
    out.flush();
    if (!out)
        throw std::runtime_error("checkpoint: write failed: " + path.string());
}

MlpParams load_checkpoint(const std::filesystem::path &path) {
    Reader r{std::ifstream(path, std::ios::binary), path};
    if (!r.in)
        throw std::runtime_error("checkpoint: cannot open: " + path.string());
    char magic[4];
    r.read(magic, 4, "magic");
    if (std::memcmp(magic, "DTKD", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic: " + path.string());
    std::uint16_t version = r.u16("version");
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                                 ": " + path.string());
    std::uint32_t n_dims = r.u32("layer count");
    if (n_dims < 2)
        throw std::runtime_error("checkpoint: fewer than two layer sizes: " + path.string());
    MlpSpec spec;
    for (std::uint32_t i = 0; i < n_dims; ++i)
        spec.layer_sizes.push_back(r.u32("layer dims"));
    spec.validate();

    MlpParams params;
    params.spec = spec;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        Matrix w(spec.layer_sizes[l], spec.layer_sizes[l + 1]);
        for (std::size_t i = 0; i < w.size(); ++i)
            w.data()[i] = r.f32("weights");
        params.weights.push_back(std::move(w));
        std::vector<double> b(spec.layer_sizes[l + 1]);
        for (double &v : b)
            v = r.f32("biases");
        params.biases.push_back(std::move(b));
    }
    return params;
}

} // namespace dtkd::net
