#include "dtkd/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace dtkd::data {

namespace {

constexpr std::uint16_t kFormatVersion = 1;

// header: magic(4) + version(2) + n_samples(4) + dim(4) + n_classes(4)
constexpr std::size_t kHeaderBytes = 18;

void generate_split(DatasetSplit &split, const Matrix &centers, int n_classes, int dim, int n,
                    double overlap, numkit::Rng &rng) {
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(n));
    int base = n / n_classes;
    int extra = n % n_classes;
    for (int c = 0; c < n_classes; ++c) {
        int count = base + (c < extra ? 1 : 0);
        labels.insert(labels.end(), static_cast<std::size_t>(count), c);
    }
    rng.shuffle(labels);

    split.features = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(dim));
    split.labels = std::move(labels);
    split.n_classes = n_classes;
    for (int i = 0; i < n; ++i) {
        auto row = split.features.row(static_cast<std::size_t>(i));
        auto center = centers.row(static_cast<std::size_t>(split.labels[static_cast<std::size_t>(i)]));
        for (int d = 0; d < dim; ++d) {
            double v = center[static_cast<std::size_t>(d)] + overlap * rng.normal();
            // quantize to f32 so stored files round-trip bit-exactly
            row[static_cast<std::size_t>(d)] = static_cast<double>(static_cast<float>(v));
        }
    }
}

struct ByteReader {
    std::ifstream in;
    std::size_t offset = 0;

    void read(void *data, std::size_t count, const char *what) {
        in.read(static_cast<char *>(data), static_cast<std::streamsize>(count));
        if (!in)
            throw ParseError("dataset: truncated file while reading " + std::string(what) +
                                 " at offset " + std::to_string(offset),
                             offset);
        offset += count;
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

void put_u16(std::string &out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string &out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string &out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

} // namespace

void DatasetSplit::validate() const {
    if (n_classes < 2)
        throw std::domain_error("DatasetSplit: need at least two classes");
    if (features.rows() != labels.size())
        throw std::domain_error("DatasetSplit: feature/label count mismatch");
    if (!features.all_finite())
        throw std::domain_error("DatasetSplit: non-finite feature");
    for (int label : labels)
        if (label < 0 || label >= n_classes)
            throw std::domain_error("DatasetSplit: label out of range");
}

std::pair<DatasetSplit, DatasetSplit> gen_synthetic(int n_classes, int dim, int n_train,
                                                    int n_test, double class_spread,
                                                    double overlap, std::uint64_t seed) {
    if (n_classes < 2)
        throw std::domain_error("gen_synthetic: need at least two classes");
    if (dim < 2)
        throw std::domain_error("gen_synthetic: need at least two dimensions");
    if (n_train < n_classes || n_test < 1)
        throw std::domain_error("gen_synthetic: split sizes too small");
    if (!(class_spread > 0.0) || overlap < 0.0)
        throw std::domain_error("gen_synthetic: invalid spread/overlap");

    numkit::Rng rng(seed);

    // class centers: random directions scaled onto the sphere
    Matrix centers(static_cast<std::size_t>(n_classes), static_cast<std::size_t>(dim));
    for (int c = 0; c < n_classes; ++c) {
        auto row = centers.row(static_cast<std::size_t>(c));
        double norm2 = 0.0;
        for (int d = 0; d < dim; ++d) {
            row[static_cast<std::size_t>(d)] = rng.normal();
            norm2 += row[static_cast<std::size_t>(d)] * row[static_cast<std::size_t>(d)];
        }
        double norm = std::sqrt(norm2);
        if (norm < 1e-12) {
            row[0] = 1.0;
            norm = 1.0;
        }
        for (int d = 0; d < dim; ++d)
            row[static_cast<std::size_t>(d)] *= class_spread / norm;
    }

    std::pair<DatasetSplit, DatasetSplit> out;
    generate_split(out.first, centers, n_classes, dim, n_train, overlap, rng);
    generate_split(out.second, centers, n_classes, dim, n_test, overlap, rng);
    return out;
}

void store_dataset(const DatasetSplit &split, const std::filesystem::path &path) {
    split.validate();
    std::string bytes;
    bytes.reserve(kHeaderBytes + split.features.size() * 4 + split.labels.size() * 2);
    bytes.append("DTKS");
    put_u16(bytes, kFormatVersion);
    put_u32(bytes, static_cast<std::uint32_t>(split.features.rows()));
    put_u32(bytes, static_cast<std::uint32_t>(split.features.cols()));
    put_u32(bytes, static_cast<std::uint32_t>(split.n_classes));
    for (std::size_t i = 0; i < split.features.size(); ++i)
        put_f32(bytes, static_cast<float>(split.features.data()[i]));
    for (int label : split.labels)
        put_u16(bytes, static_cast<std::uint16_t>(label));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("dataset: cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out)
        throw std::runtime_error("dataset: write failed: " + path.string());
}

DatasetSplit load_dataset(const std::filesystem::path &path) {
    ByteReader r{std::ifstream(path, std::ios::binary)};
    if (!r.in)
        throw ParseError("dataset: cannot open: " + path.string(), 0);
    char magic[4];
    r.read(magic, 4, "magic");
    if (std::memcmp(magic, "DTKS", 4) != 0)
        throw ParseError("dataset: bad magic at offset 0: " + path.string(), 0);
    std::uint16_t version = r.u16("version");
    if (version != kFormatVersion)
        throw ParseError("dataset: unsupported version " + std::to_string(version) +
                             " at offset 4",
                         4);
    std::uint32_t n = r.u32("sample count");
    std::uint32_t dim = r.u32("dimension");
    std::uint32_t n_classes = r.u32("class count");
    if (n == 0 || dim == 0 || n_classes < 2)
        throw ParseError("dataset: empty header field at offset 6", 6);

    DatasetSplit split;
    split.n_classes = static_cast<int>(n_classes);
    split.features = Matrix(n, dim);
    for (std::size_t i = 0; i < split.features.size(); ++i)
        split.features.data()[i] = r.f32("features");
    split.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::size_t record_offset = r.offset;
        std::uint16_t label = r.u16("labels");
        if (label >= n_classes)
            throw ParseError("dataset: label out of range in record " + std::to_string(i) +
                                 " at offset " + std::to_string(record_offset),
                             record_offset);
        split.labels[i] = static_cast<int>(label);
    }
    return split;
}

std::vector<Batch> batches(const DatasetSplit &split, std::size_t batch_size,
                           std::uint64_t seed, std::size_t epoch) {
    if (batch_size == 0)
        throw std::domain_error("batches: batch_size must be positive");
    const std::size_t n = split.features.rows();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i)
        perm[i] = i;
    numkit::Rng rng(numkit::mix_seed(seed, epoch));
    rng.shuffle(perm);

    std::vector<Batch> out;
    out.reserve((n + batch_size - 1) / batch_size);
    for (std::size_t start = 0; start < n; start += batch_size) {
        std::size_t count = std::min(batch_size, n - start);
        Batch batch;
        batch.features = Matrix(count, split.features.cols());
        batch.labels.resize(count);
        batch.indices.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t src = perm[start + i];
            batch.indices[i] = src;
            batch.labels[i] = split.labels[src];
            auto dst = batch.features.row(i);
            auto from = split.features.row(src);
            std::copy(from.begin(), from.end(), dst.begin());
        }
        out.push_back(std::move(batch));
    }
    return out;
}

} // namespace dtkd::data
