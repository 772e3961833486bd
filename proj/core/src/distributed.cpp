#include "seng/distributed.hpp"

#include <chrono>
#include <cmath>

#include "seng/rng.hpp"

namespace seng::dist {

std::vector<WorkerShard> shard_batch(int batch_size, int workers) {
    if (workers < 1) throw DimensionError("shard_batch: workers must be >= 1");
    if (workers > batch_size)
        throw DimensionError("shard_batch: workers (" + std::to_string(workers) +
                             ") exceed batch size (" + std::to_string(batch_size) + ")");
    std::vector<WorkerShard> shards;
    shards.reserve(workers);
    const int base = batch_size / workers;
    const int extra = batch_size % workers;
    int cursor = 0;
    for (int w = 0; w < workers; ++w) {
        const int sz = base + (w < extra ? 1 : 0);
        shards.push_back({w, cursor, cursor + sz});
        cursor += sz;
    }
    return shards;
}

std::vector<double> local_coeffs(const curvature::CurvatureBlock& local_block,
                                 std::span<const double> g_ref, double lambda,
                                 const direction::SketchPlan& plan) {
    return direction::layer_coeffs(local_block, g_ref, lambda, plan);
}

std::vector<double> allreduce_combine(std::span<const std::vector<double>> local_grads,
                                      std::span<const std::vector<double>> contributions,
                                      double lambda, int workers) {
    if (int(local_grads.size()) != workers || int(contributions.size()) != workers)
        throw ProtocolError("allreduce_combine: expected " + std::to_string(workers) +
                            " shard reports, got " + std::to_string(local_grads.size()) + "/" +
                            std::to_string(contributions.size()));
    if (workers < 1) throw ProtocolError("allreduce_combine: no workers");
    const std::size_t n = local_grads[0].size();
    std::vector<double> g_mean(n, 0.0);
    std::vector<double> c_mean(n, 0.0);
    for (int w = 0; w < workers; ++w) {
        if (local_grads[w].size() != n || contributions[w].size() != n)
            throw ProtocolError("allreduce_combine: shard payload length mismatch");
        axpy(1.0, local_grads[w], g_mean);
        axpy(1.0, contributions[w], c_mean);
    }
    const double inv_m = 1.0 / double(workers);
    const double a = 1.0 / lambda;
    std::vector<double> d(n);
    for (std::size_t k = 0; k < n; ++k) d[k] = a * (c_mean[k] * inv_m - g_mean[k] * inv_m);
    return d;
}

std::vector<double> distributed_uc(std::span<const curvature::CurvatureBlock> worker_blocks,
                                   std::span<const std::vector<double>> worker_coeffs) {
    if (worker_blocks.empty() || worker_blocks.size() != worker_coeffs.size())
        throw ProtocolError("distributed_uc: worker report mismatch");

    const curvature::CurvatureBlock* ref = nullptr;
    for (const auto& b : worker_blocks)
        if (!b.empty()) {
            ref = &b;
            break;
        }
    if (ref == nullptr) return {};
    const int n_g = ref->n_g, n_a = ref->n_a, r = ref->rank;

    Matrix g_sum(n_g, r);
    Matrix a_sum(n_a, r);
    for (std::size_t w = 0; w < worker_blocks.size(); ++w) {
        const curvature::CurvatureBlock& b = worker_blocks[w];
        if (b.empty()) continue;
        if (b.mode != curvature::Mode::Implicit)
            throw ProtocolError("distributed_uc: explicit block in implicit reduction");
        const std::vector<double>& c = worker_coeffs[w];
        if (int(c.size()) != b.samples) throw ProtocolError("distributed_uc: coeff length mismatch");
        double denom = 0.0;
        for (double ci : c) denom += std::sqrt(std::abs(ci));
        if (denom < 1e-30) continue;  // this worker contributes zero
        for (int j = 0; j < b.samples; ++j) {
            axpy(std::sqrt(std::abs(c[j])), b.g_bank[j].flat(), g_sum.flat());
            axpy(c[j] / denom, b.a_bank[j].flat(), a_sum.flat());
        }
    }
    return mat_vec(matmul_nt(g_sum, a_sum));
}

DistributedSengTrainer::DistributedSengTrainer(net::Network& network, optim::TrainConfig config)
    : net_(network), config_(std::move(config)), sync_(config_.workers) {
    config_.validate();
    worker_blocks_.resize(config_.workers);
    for (auto& blocks : worker_blocks_) blocks.resize(net_.num_param_layers());
    prev_grad_.resize(net_.num_param_layers());
}

metrics::MetricsRecord DistributedSengTrainer::step(const optim::Batch& batch, double epoch_k) {
    const auto t0 = std::chrono::steady_clock::now();
    const int m = config_.workers;
    const int rho = batch.inputs.rows();
    const std::vector<WorkerShard> shards = shard_batch(rho, m);
    const optim::ScheduleValues sched = optim::schedule_eval(config_, epoch_k);
    const int num_layers = net_.num_param_layers();

    // Local forward/backward per shard.
    std::vector<std::vector<std::vector<double>>> local_grads(m);  // [worker][layer]
    std::vector<net::BackwardResult> local_back(m);
    double loss_acc = 0.0;
    for (const WorkerShard& sh : shards) {
        Matrix inputs(sh.size(), batch.inputs.cols());
        for (int i = 0; i < sh.size(); ++i) {
            auto src = batch.inputs.row(sh.begin + i);
            std::copy(src.begin(), src.end(), inputs.row(i).begin());
        }
        Matrix targets;
        std::vector<int> labels;
        if (config_.loss == net::LossKind::Mse) {
            targets = Matrix(sh.size(), batch.targets.cols());
            for (int i = 0; i < sh.size(); ++i) {
                auto src = batch.targets.row(sh.begin + i);
                std::copy(src.begin(), src.end(), targets.row(i).begin());
            }
        } else {
            labels.assign(batch.labels.begin() + sh.begin, batch.labels.begin() + sh.end);
        }

        net::ForwardCache cache = net_.forward(inputs);
        net::LossResult loss = net::loss_and_grad(cache.outputs, targets, labels, config_.loss,
                                                  net::Reduction::Mean);
        if (!std::isfinite(loss.loss))
            throw optim::NonFiniteLossError(
                "distributed step: non-finite loss at step " + std::to_string(step_), step_);
        loss_acc += loss.loss * double(sh.size()) / double(rho);
        local_back[sh.worker_id] = net_.backward_factors(cache, loss.per_sample_grads);
        local_grads[sh.worker_id] = std::move(local_back[sh.worker_id].mean_gradient);
        if (config_.weight_decay != 0.0)
            for (int pl = 0; pl < num_layers; ++pl)
                axpy(config_.weight_decay, net_.param(pl).flat(), local_grads[sh.worker_id][pl]);
    }

    // Gradient all-reduce (mean across workers).
    long grad_payload = 0;
    std::vector<std::vector<double>> g(num_layers);
    for (int pl = 0; pl < num_layers; ++pl) {
        g[pl].assign(local_grads[0][pl].size(), 0.0);
        for (int w = 0; w < m; ++w) axpy(1.0, local_grads[w][pl], g[pl]);
        scale(1.0 / double(m), g[pl]);
        grad_payload += long(g[pl].size()) * 8;
    }

    const bool stale = config_.stale_coeffs && has_prev_grad_;
    sync_.record(grad_payload, true);

    // Curvature refresh from the shard-local factors of the refresh batch,
    // scaled by 1/√ϱ of the global batch.
    if (step_ % config_.update_freq == 0) {
        for (int w = 0; w < m; ++w)
            for (int pl = 0; pl < num_layers; ++pl)
                worker_blocks_[w][pl] = curvature::route_and_refresh(
                    std::move(worker_blocks_[w][pl]), local_back[w].factors[pl], step_,
                    config_.update_freq, config_.threshold, config_.rank, config_.routing, rho);
    }

    metrics::MetricsRecord rec;
    rec.step = step_;
    rec.epoch = long(epoch_k);
    rec.train_loss = loss_acc;
    double gnorm2 = 0.0;
    for (const auto& gl : g) gnorm2 += dot(gl, gl);
    rec.grad_norm = std::sqrt(gnorm2);

    long dir_payload = 0;
    for (int pl = 0; pl < num_layers; ++pl) {
        const std::vector<double>& g_ref = stale ? prev_grad_[pl] : g[pl];

        direction::SketchPlan plan;
        plan.kind = config_.sketch_kind;
        const int n = net_.param_count(pl);
        plan.q = config_.sketch_q > 0 ? config_.sketch_q : optim::auto_sketch_q(n);
        plan.zeta_g = config_.sketch_zeta_g;
        plan.zeta_a = config_.sketch_zeta_a;
        plan.with_replacement = config_.sketch_with_replacement;
        plan.literal_scaling = config_.sketch_literal_scaling;
        plan.seed = derive_seed(config_.seed, std::uint64_t(step_), std::uint64_t(pl));
        plan.uc_mode = config_.uc_exact ? curvature::UcMode::Exact : curvature::UcMode::Averaged;

        std::vector<std::vector<double>> coeffs(m);
        for (int w = 0; w < m; ++w)
            coeffs[w] = local_coeffs(worker_blocks_[w][pl], g_ref, sched.lambda, plan);

        bool implicit = false;
        for (int w = 0; w < m; ++w)
            if (!worker_blocks_[w][pl].empty() &&
                worker_blocks_[w][pl].mode == curvature::Mode::Implicit)
                implicit = true;

        std::vector<double> d;
        if (implicit) {
            std::vector<curvature::CurvatureBlock> blocks;
            blocks.reserve(m);
            for (int w = 0; w < m; ++w) blocks.push_back(worker_blocks_[w][pl]);
            std::vector<double> uc = distributed_uc(blocks, coeffs);
            if (uc.empty()) uc.assign(g[pl].size(), 0.0);
            d.resize(g[pl].size());
            const double a = 1.0 / sched.lambda;
            for (std::size_t k = 0; k < d.size(); ++k) d[k] = a * (uc[k] - g[pl][k]);
            dir_payload += long(worker_blocks_[0][pl].empty()
                                    ? 0
                                    : (worker_blocks_[0][pl].n_g + worker_blocks_[0][pl].n_a) *
                                          worker_blocks_[0][pl].rank) *
                           8;
        } else {
            std::vector<std::vector<double>> contribs(m);
            for (int w = 0; w < m; ++w) {
                const curvature::CurvatureBlock& b = worker_blocks_[w][pl];
                if (b.empty())
                    contribs[w].assign(g[pl].size(), 0.0);
                else
                    contribs[w] = matvec(b.u, coeffs[w]);
            }
            std::vector<std::vector<double>> layer_grads(m);
            for (int w = 0; w < m; ++w) layer_grads[w] = local_grads[w][pl];
            d = allreduce_combine(layer_grads, contribs, sched.lambda, m);
            dir_payload += long(g[pl].size()) * 8;
        }

        net_.apply_update(pl, d, sched.alpha);
    }
    // Fresh mode ships the direction contributions in their own reduction;
    // stale mode overlaps them with the gradient reduction.
    sync_.record(dir_payload, !stale);

    prev_grad_ = std::move(g);
    has_prev_grad_ = true;

    const TrafficRecord tr = sync_.flush(step_);
    traffic_.push_back(tr);
    rec.payload_bytes = tr.payload_bytes;
    ++step_;
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

}  // namespace seng::dist
