#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "seng/curvature.hpp"
#include "seng/direction.hpp"
#include "seng/matrix.hpp"
#include "seng/metrics.hpp"
#include "seng/net.hpp"

namespace seng::optim {

enum class OptimizerKind { Seng, Sgd };
enum class LrScheduleKind { Constant, Cosine, Exp };

struct TrainConfig {
    // step size schedule
    double lr = 0.1;  // α₀
    LrScheduleKind lr_schedule = LrScheduleKind::Constant;
    double decay_rate = 6.0;  // exp schedule exponent
    int warmup_epochs = 0;    // linear warmup window, 0 = off
    double warmup_lr = 0.0;   // α at epoch 0 when warming up
    int max_epoch = 10;

    // damping schedule λ(e) = damping · damping_factor^(e / damping_period)
    double damping = 1.0;
    double damping_factor = 1.0;
    double damping_period = 10.0;

    // curvature refresh and routing
    int update_freq = 1;           // T
    long threshold = 200000;       // 𝒯
    curvature::RoutingRule routing = curvature::RoutingRule::ParamThreshold;
    int rank = 16;                 // implicit bank rank, clamped per layer to κ

    // sketching
    sketch::SketchKind sketch_kind = sketch::SketchKind::Uniform;
    int sketch_q = 0;  // 0 = auto: min(n, max(64, n/4))
    int sketch_zeta_g = 0;
    int sketch_zeta_a = 0;
    bool sketch_with_replacement = true;
    bool sketch_literal_scaling = false;
    bool uc_exact = false;
    bool record_diagnostics = false;

    int batch_size = 32;  // ϱ

    // baseline
    double momentum = 0.9;
    double weight_decay = 0.0;

    // distributed
    int workers = 1;
    bool stale_coeffs = false;

    net::LossKind loss = net::LossKind::CrossEntropy;
    std::uint64_t seed = 0;

    void validate() const;
};

// (α_k, λ_k) at a continuous epoch position e = step / steps_per_epoch.
struct ScheduleValues {
    double alpha = 0.0;
    double lambda = 0.0;
};
ScheduleValues schedule_eval(const TrainConfig& config, double epoch_k);

int auto_sketch_q(int n);

struct Batch {
    Matrix inputs;            // ϱ × d
    Matrix targets;           // regression targets (MSE)
    std::vector<int> labels;  // class labels (cross-entropy)
};

class NonFiniteLossError : public Error {
public:
    NonFiniteLossError(const std::string& msg, long step) : Error(msg), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

// Second-order training loop state: per-layer curvature blocks refreshed
// every T steps, directions assembled per layer, θ_{k+1} = θ_k + α_k d̂_k.
class SengOptimizer {
public:
    SengOptimizer(net::Network& network, TrainConfig config);

    metrics::MetricsRecord step(const Batch& batch, double epoch_k);

    long steps_taken() const { return step_; }
    const std::vector<curvature::CurvatureBlock>& blocks() const { return blocks_; }
    const TrainConfig& config() const { return config_; }

private:
    net::Network& net_;
    TrainConfig config_;
    std::vector<curvature::CurvatureBlock> blocks_;
    long step_ = 0;
};

// Momentum SGD with decoupled weight-decay addition to the gradient.
class SgdOptimizer {
public:
    SgdOptimizer(net::Network& network, TrainConfig config);

    metrics::MetricsRecord step(const Batch& batch, double epoch_k);

    long steps_taken() const { return step_; }

private:
    net::Network& net_;
    TrainConfig config_;
    std::vector<std::vector<double>> velocity_;
    long step_ = 0;
};

// Mean loss and full gradient norm over an entire dataset; used by the
// convergence checks.
struct FullBatchStats {
    double loss = 0.0;
    double grad_norm = 0.0;
};
FullBatchStats full_batch_stats(const net::Network& network, const Batch& data,
                                net::LossKind kind);

}  // namespace seng::optim
