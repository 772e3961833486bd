#include "seng/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "seng/rng.hpp"

namespace seng::harness {

Dataset make_two_blob_classification(int n, int dim, std::uint64_t seed, double separation,
                                     double noise) {
    if (n < 2 || dim < 1) throw DimensionError("make_two_blob_classification: bad sizes");
    Dataset ds;
    ds.inputs = Matrix(n, dim);
    ds.labels.resize(n);
    ds.num_classes = 2;
    Rng rng(derive_seed(seed, 0x2b10b5));
    const double shift = separation / std::sqrt(double(dim));
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;  // balanced by construction
        const double c = label == 0 ? -shift : shift;
        for (int j = 0; j < dim; ++j) ds.inputs(i, j) = c + noise * rng.normal();
        ds.labels[i] = label;
    }
    return ds;
}

namespace {

std::uint32_t read_be32(std::ifstream& in, long& offset, const char* what) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (in.gcount() != 4)
        throw FormatError(std::string("load_idx: truncated while reading ") + what, offset);
    offset += 4;
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

IdxTensor load_idx(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("load_idx: cannot open " + path, 0);

    long offset = 0;
    const std::uint32_t magic = read_be32(in, offset, "magic");
    if (magic != 0x00000803u && magic != 0x00000801u)
        throw FormatError("load_idx: bad magic 0x" + std::to_string(magic), 0);

    const int ndims = int(magic & 0xFFu);
    IdxTensor t;
    std::size_t count = 1;
    for (int d = 0; d < ndims; ++d) {
        const std::uint32_t dim = read_be32(in, offset, "dimension header");
        t.dims.push_back(int(dim));
        count *= dim;
    }

    t.raw.resize(count);
    in.read(reinterpret_cast<char*>(t.raw.data()), std::streamsize(count));
    if (std::size_t(in.gcount()) != count)
        throw FormatError("load_idx: truncated payload", offset + long(in.gcount()));

    t.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) t.data[i] = double(t.raw[i]) / 255.0;
    return t;
}

Matrix idx_to_matrix(const IdxTensor& t) {
    if (t.dims.empty()) throw DimensionError("idx_to_matrix: empty tensor");
    const int n = t.dims[0];
    std::size_t row = 1;
    for (std::size_t d = 1; d < t.dims.size(); ++d) row *= std::size_t(t.dims[d]);
    if (row == 0 || n == 0) throw DimensionError("idx_to_matrix: zero-sized tensor");
    return Matrix(n, int(row), t.data);
}

std::vector<int> idx_to_labels(const IdxTensor& t) {
    if (t.dims.size() != 1) throw DimensionError("idx_to_labels: expected a 1-D tensor");
    std::vector<int> labels(t.raw.size());
    for (std::size_t i = 0; i < t.raw.size(); ++i) labels[i] = int(t.raw[i]);
    return labels;
}

}  // namespace seng::harness
