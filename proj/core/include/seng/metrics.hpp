#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace seng::metrics {

// One row of training telemetry. Optional fields print as empty CSV cells.
struct MetricsRecord {
    long step = 0;
    long epoch = 0;
    double train_loss = 0.0;
    double grad_norm = 0.0;
    std::optional<double> test_accuracy;
    std::optional<double> eta_est;
    std::optional<double> eps_est;
    long payload_bytes = 0;
    double wall_ms = 0.0;

    // In-memory diagnostics, not part of the CSV schema.
    double step_norm = 0.0;        // ‖θ_{k+1} − θ_k‖
    double step_norm_bound = 0.0;  // (α/λ)‖g‖(1 + ‖b̂‖‖U‖_F/‖g‖)
};

inline constexpr const char* kCsvHeader =
    "step,epoch,train_loss,grad_norm,test_acc,eta_est,eps_est,payload_bytes,wall_ms";

std::string to_csv_row(const MetricsRecord& r);

// Serializes rows through a single stream with the fixed header.
class CsvSink {
public:
    explicit CsvSink(std::ostream& out);
    void write(const MetricsRecord& r);

private:
    std::ostream& out_;
};

}  // namespace seng::metrics
