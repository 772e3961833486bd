#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "seng/curvature.hpp"
#include "seng/direction.hpp"
#include "seng/matrix.hpp"
#include "seng/metrics.hpp"
#include "seng/net.hpp"
#include "seng/optimizer.hpp"

namespace seng::dist {

class ProtocolError : public Error {
public:
    using Error::Error;
};

// Contiguous slice [begin, end) of the step's batch owned by one worker.
struct WorkerShard {
    int worker_id = 0;
    int begin = 0;
    int end = 0;

    int size() const { return end - begin; }
};

// Deterministic even split; the first (batch % workers) shards carry one
// extra sample. Throws when workers exceed the batch.
std::vector<WorkerShard> shard_batch(int batch_size, int workers);

struct TrafficRecord {
    long step = 0;
    long payload_bytes = 0;
    int num_syncs = 0;
};

// Byte accounting for the simulated ring all-reduce. Per reduction of a
// payload of P bytes each worker moves 2(M-1)/M · P bytes.
class SyncBuffer {
public:
    explicit SyncBuffer(int workers) : workers_(workers) {}

    long ring_bytes(long payload_bytes) const {
        if (workers_ <= 1) return 0;
        return payload_bytes * 2 * (workers_ - 1) / workers_;
    }

    // separate_sync starts a new synchronization event; otherwise the payload
    // piggybacks on the previous one.
    void record(long payload_bytes, bool separate_sync) {
        bytes_ += ring_bytes(payload_bytes);
        if (separate_sync) ++syncs_;
    }

    TrafficRecord flush(long step) {
        TrafficRecord r{step, bytes_, syncs_};
        bytes_ = 0;
        syncs_ = 0;
        return r;
    }

private:
    int workers_;
    long bytes_ = 0;
    int syncs_ = 0;
};

// Block-diagonal coefficients: b̂_i = (λI + U_iᵀU_i)⁻¹ U_iᵀ g_ref computed
// through the worker's local sketching path (fresh mode passes g_k, stale
// mode passes g_{k-1}).
std::vector<double> local_coeffs(const curvature::CurvatureBlock& local_block,
                                 std::span<const double> g_ref, double lambda,
                                 const direction::SketchPlan& plan);

// d = −(1/λ)·mean(local gradients) + (1/λ)·mean(contributions). Throws
// ProtocolError unless exactly `workers` entries arrived on both sides.
std::vector<double> allreduce_combine(std::span<const std::vector<double>> local_grads,
                                      std::span<const std::vector<double>> contributions,
                                      double lambda, int workers);

// Reduced-communication Uc for implicit layers: workers form weighted factor
// partial sums (local √|c| denominators), the sums are reduced, and the
// result is one factored product. A worker whose denominator vanishes
// contributes zero.
std::vector<double> distributed_uc(std::span<const curvature::CurvatureBlock> worker_blocks,
                                   std::span<const std::vector<double>> worker_coeffs);

// Simulated M-worker data-parallel training step. Workers run sequentially
// between barriers and share data only through the sync buffer, so the
// result is identical to any interleaved execution.
class DistributedSengTrainer {
public:
    DistributedSengTrainer(net::Network& network, optim::TrainConfig config);

    metrics::MetricsRecord step(const optim::Batch& batch, double epoch_k);

    long steps_taken() const { return step_; }
    const std::vector<TrafficRecord>& traffic_log() const { return traffic_; }

private:
    net::Network& net_;
    optim::TrainConfig config_;
    std::vector<std::vector<curvature::CurvatureBlock>> worker_blocks_;  // [worker][layer]
    std::vector<std::vector<double>> prev_grad_;                         // per layer
    bool has_prev_grad_ = false;
    SyncBuffer sync_;
    std::vector<TrafficRecord> traffic_;
    long step_ = 0;
};

}  // namespace seng::dist
