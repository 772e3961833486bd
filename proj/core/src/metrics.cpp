#include "seng/metrics.hpp"

#include <charconv>

namespace seng::metrics {

namespace {

// shortest round-trip decimal form
std::string fmt(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

std::string to_csv_row(const MetricsRecord& r) {
    std::string row;
    row += std::to_string(r.step);
    row += ',';
    row += std::to_string(r.epoch);
    row += ',';
    row += fmt(r.train_loss);
    row += ',';
    row += fmt(r.grad_norm);
    row += ',';
    row += fmt(r.test_accuracy);
    row += ',';
    row += fmt(r.eta_est);
    row += ',';
    row += fmt(r.eps_est);
    row += ',';
    row += std::to_string(r.payload_bytes);
    row += ',';
    row += fmt(r.wall_ms);
    return row;
}

CsvSink::CsvSink(std::ostream& out) : out_(out) { out_ << kCsvHeader << '\n'; }

void CsvSink::write(const MetricsRecord& r) { out_ << to_csv_row(r) << '\n'; }

}  // namespace seng::metrics
