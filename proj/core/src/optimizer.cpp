#include "seng/optimizer.hpp"

#include <chrono>
#include <cmath>

#include "seng/rng.hpp"

namespace seng::optim {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw DimensionError("config: lr must be positive");
    if (!(damping > 0.0) || !(damping_factor > 0.0))
        throw DimensionError("config: damping schedule must stay positive");
    if (update_freq < 1) throw DimensionError("config: update-freq must be >= 1");
    if (batch_size < 1) throw DimensionError("config: batch-size must be >= 1");
    if (max_epoch < 1) throw DimensionError("config: epochs must be >= 1");
    if (workers < 1) throw DimensionError("config: workers must be >= 1");
    if (workers > batch_size) throw DimensionError("config: workers exceed batch size");
    if (rank < 1) throw DimensionError("config: rank must be >= 1");
    if (damping_period <= 0.0) throw DimensionError("config: damping-period must be positive");
}

ScheduleValues schedule_eval(const TrainConfig& config, double epoch_k) {
    if (epoch_k < 0.0 || epoch_k > double(config.max_epoch))
        throw DimensionError("schedule_eval: epoch out of range");

    double alpha;
    const double frac = epoch_k / double(config.max_epoch);
    switch (config.lr_schedule) {
        case LrScheduleKind::Cosine:
            alpha = 0.001 + 0.5 * (config.lr - 0.001) * (1.0 + std::cos(frac * M_PI));
            break;
        case LrScheduleKind::Exp:
            alpha = config.lr * std::pow(1.0 - frac, config.decay_rate);
            break;
        default:
            alpha = config.lr;
    }
    if (config.warmup_epochs > 0 && epoch_k < double(config.warmup_epochs)) {
        const double t = epoch_k / double(config.warmup_epochs);
        alpha = config.warmup_lr + (config.lr - config.warmup_lr) * t;
    }

    const double lambda =
        config.damping * std::pow(config.damping_factor, epoch_k / config.damping_period);
    return {alpha, lambda};
}

int auto_sketch_q(int n) { return std::min(n, std::max(64, n / 4)); }

namespace {

net::LossResult eval_loss(const TrainConfig& config, const Matrix& outputs, const Batch& batch) {
    return net::loss_and_grad(outputs, batch.targets, batch.labels, config.loss,
                              net::Reduction::Mean);
}

double flat_norm(const std::vector<std::vector<double>>& per_layer) {
    double acc = 0.0;
    for (const auto& g : per_layer)
        for (double v : g) acc += v * v;
    return std::sqrt(acc);
}

}  // namespace

SengOptimizer::SengOptimizer(net::Network& network, TrainConfig config)
    : net_(network), config_(std::move(config)) {
    config_.validate();
    blocks_.resize(net_.num_param_layers());
}

metrics::MetricsRecord SengOptimizer::step(const Batch& batch, double epoch_k) {
    const auto t0 = std::chrono::steady_clock::now();
    const ScheduleValues sched = schedule_eval(config_, epoch_k);

    net::ForwardCache cache = net_.forward(batch.inputs);
    net::LossResult loss = eval_loss(config_, cache.outputs, batch);
    if (!std::isfinite(loss.loss))
        throw NonFiniteLossError("seng_step: non-finite loss at step " + std::to_string(step_),
                                 step_);
    net::BackwardResult back = net_.backward_factors(cache, loss.per_sample_grads);

    metrics::MetricsRecord rec;
    rec.step = step_;
    rec.epoch = long(epoch_k);
    rec.train_loss = loss.loss;
    rec.grad_norm = flat_norm(back.mean_gradient);

    double step_norm2 = 0.0;
    double bound = 0.0;
    for (int pl = 0; pl < net_.num_param_layers(); ++pl) {
        std::vector<double>& g = back.mean_gradient[pl];
        if (config_.weight_decay != 0.0) {
            const Matrix& w = net_.param(pl);
            axpy(config_.weight_decay, w.flat(), g);
        }

        blocks_[pl] = curvature::route_and_refresh(std::move(blocks_[pl]), back.factors[pl],
                                                   step_, config_.update_freq, config_.threshold,
                                                   config_.rank, config_.routing);

        direction::SketchPlan plan;
        plan.kind = config_.sketch_kind;
        const int n = net_.param_count(pl);
        plan.q = config_.sketch_q > 0 ? config_.sketch_q : auto_sketch_q(n);
        plan.zeta_g = config_.sketch_zeta_g;
        plan.zeta_a = config_.sketch_zeta_a;
        plan.with_replacement = config_.sketch_with_replacement;
        plan.literal_scaling = config_.sketch_literal_scaling;
        plan.seed = derive_seed(config_.seed, std::uint64_t(step_), std::uint64_t(pl));
        plan.uc_mode = config_.uc_exact ? curvature::UcMode::Exact : curvature::UcMode::Averaged;

        direction::DirectionResult dir =
            direction::layer_direction(blocks_[pl], g, sched.lambda, plan);

        if (config_.record_diagnostics && pl == 0 &&
            blocks_[pl].mode == curvature::Mode::Explicit && !blocks_[pl].empty()) {
            sketch::SketchSpec spec;
            spec.kind = blocks_[pl].row_probs.empty() ? sketch::SketchKind::Uniform : plan.kind;
            spec.q = std::min(plan.q, n);
            spec.with_replacement = plan.with_replacement && spec.q < n;
            spec.literal_scaling = plan.literal_scaling;
            spec.seed = plan.seed;
            const sketch::SketchOperator op = spec.q == n
                                                  ? sketch::identity_sketch(n)
                                                  : sketch::build_sketch(spec, blocks_[pl].row_probs, n);
            try {
                const sketch::SketchDiagnostics diag =
                    sketch::sketch_diagnostics(op, blocks_[pl].u, g);
                rec.eta_est = diag.eta;
                rec.eps_est = diag.eps;
            } catch (const DegenerateInputError&) {
            }
        }

        net_.apply_update(pl, dir.d, sched.alpha);

        for (double v : dir.d) step_norm2 += sched.alpha * sched.alpha * v * v;
        const double gn = norm2(g);
        double u_fro = 0.0;
        if (!blocks_[pl].empty()) {
            if (blocks_[pl].mode == curvature::Mode::Explicit) {
                u_fro = norm2(blocks_[pl].u.flat());
            } else {
                // trace(UᵀU) from the factor banks
                const Matrix gram = curvature::utu(blocks_[pl]);
                double tr = 0.0;
                for (int i = 0; i < gram.rows(); ++i) tr += std::max(0.0, gram(i, i));
                u_fro = std::sqrt(tr);
            }
        }
        bound += (sched.alpha / sched.lambda) * (gn + u_fro * norm2(dir.coeffs));
    }
    rec.step_norm = std::sqrt(step_norm2);
    rec.step_norm_bound = bound;

    ++step_;
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return rec;
}

SgdOptimizer::SgdOptimizer(net::Network& network, TrainConfig config)
    : net_(network), config_(std::move(config)) {
    config_.validate();
    velocity_.resize(net_.num_param_layers());
    for (int pl = 0; pl < net_.num_param_layers(); ++pl)
        velocity_[pl].assign(std::size_t(net_.param_count(pl)), 0.0);
}

metrics::MetricsRecord SgdOptimizer::step(const Batch& batch, double epoch_k) {
    const auto t0 = std::chrono::steady_clock::now();
    const ScheduleValues sched = schedule_eval(config_, epoch_k);

    net::ForwardCache cache = net_.forward(batch.inputs);
    net::LossResult loss = eval_loss(config_, cache.outputs, batch);
    if (!std::isfinite(loss.loss))
        throw NonFiniteLossError("sgd_step: non-finite loss at step " + std::to_string(step_),
                                 step_);
    net::BackwardResult back = net_.backward_factors(cache, loss.per_sample_grads);

    metrics::MetricsRecord rec;
    rec.step = step_;
    rec.epoch = long(epoch_k);
    rec.train_loss = loss.loss;
    rec.grad_norm = flat_norm(back.mean_gradient);

    for (int pl = 0; pl < net_.num_param_layers(); ++pl) {
        std::vector<double>& g = back.mean_gradient[pl];
        if (config_.weight_decay != 0.0) axpy(config_.weight_decay, net_.param(pl).flat(), g);
        std::vector<double>& v = velocity_[pl];
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = config_.momentum * v[k] + g[k];
        net_.apply_update(pl, v, -sched.alpha);
    }

    ++step_;
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return rec;
}

FullBatchStats full_batch_stats(const net::Network& network, const Batch& data,
                                net::LossKind kind) {
    net::ForwardCache cache = network.forward(data.inputs);
    net::LossResult loss =
        net::loss_and_grad(cache.outputs, data.targets, data.labels, kind, net::Reduction::Mean);
    net::BackwardResult back = network.backward_factors(cache, loss.per_sample_grads);
    FullBatchStats st;
    st.loss = loss.loss;
    st.grad_norm = flat_norm(back.mean_gradient);
    return st;
}

}  // namespace seng::optim
