#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seng/matrix.hpp"

namespace seng::harness {

class FormatError : public Error {
public:
    FormatError(const std::string& msg, long byte_offset)
        : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}
    long byte_offset() const { return offset_; }

private:
    long offset_;
};

struct Dataset {
    Matrix inputs;  // N × d
    std::vector<int> labels;
    Matrix targets;  // regression targets; empty for classification
    int num_classes = 0;
};

// Two Gaussian blobs at ±center in ℝ^dim with balanced labels.
Dataset make_two_blob_classification(int n, int dim, std::uint64_t seed, double separation = 2.0,
                                     double noise = 0.6);

// IDX tensor (big-endian magic + dims, unsigned byte payload). `data` holds
// the payload mapped to [0,1]; `raw` the original bytes.
struct IdxTensor {
    std::vector<int> dims;
    std::vector<double> data;
    std::vector<std::uint8_t> raw;
};

// Accepts the image magic 0x00000803 and the label magic 0x00000801.
// Truncation or a bad magic raises FormatError with the failing byte offset.
IdxTensor load_idx(const std::string& path);

// Images flattened to one row per leading-dimension entry.
Matrix idx_to_matrix(const IdxTensor& t);
std::vector<int> idx_to_labels(const IdxTensor& t);

}  // namespace seng::harness
