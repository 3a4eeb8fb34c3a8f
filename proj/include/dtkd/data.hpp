#pragma once

// Deterministic synthetic classification data, the DTKS on-disk format, and
// seeded batch iteration.

#include "dtkd/numkit.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dtkd::data {

using numkit::Matrix;

struct DatasetSplit {
    Matrix features; // N x D
    std::vector<int> labels;
    int n_classes = 0;

    void validate() const; // throws std::domain_error
};

/// Parse failure for the DTKS format; the message names the byte offset (or
/// record index) where the file went wrong.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string &message, std::size_t offset)
        : std::runtime_error(message), offset_(offset) {}
    std::size_t offset() const { return offset_; }

  private:
    std::size_t offset_;
};

/// Samples drawn around class centers placed on a sphere of radius
/// class_spread, with isotropic noise of scale overlap. Labels are balanced
/// within one sample; features are quantized to f32 so the in-memory split
/// matches its stored bytes exactly. Deterministic per seed.
std::pair<DatasetSplit, DatasetSplit> gen_synthetic(int n_classes, int dim, int n_train,
                                                    int n_test, double class_spread,
                                                    double overlap, std::uint64_t seed);

/// DTKS file: "DTKS" magic, u16 version, u32 n_samples/dim/n_classes
/// little-endian, f32 row-major features, u16 labels.
void store_dataset(const DatasetSplit &split, const std::filesystem::path &path);
DatasetSplit load_dataset(const std::filesystem::path &path);

struct Batch {
    Matrix features;
    std::vector<int> labels;
    std::vector<std::size_t> indices; // positions in the source split
};

/// A seeded permutation (derived from seed and epoch) partitioned into
/// batches; the last short batch is kept.
std::vector<Batch> batches(const DatasetSplit &split, std::size_t batch_size,
                           std::uint64_t seed, std::size_t epoch);

} // namespace dtkd::data
