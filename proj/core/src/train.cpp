#include "seng/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "seng/data.hpp"
#include "seng/distributed.hpp"
#include "seng/matrix.hpp"
#include "seng/metrics.hpp"
#include "seng/net.hpp"
#include "seng/ntk.hpp"
#include "seng/optimizer.hpp"
#include "seng/rng.hpp"

namespace seng::harness {

namespace {

void emit_error(const std::string& code, const std::string& message) {
    std::string msg = message;
    for (char& c : msg)
        if (c == '"' || c == '\n') c = ' ';
    std::cerr << "{\"error\":\"" << code << "\",\"message\":\"" << msg << "\"}" << std::endl;
}

struct CliSettings {
    optim::TrainConfig config;
    std::string optimizer = "seng";
    std::string dataset = "synthetic";
    std::string out_dir = "out";
    std::string idx_images, idx_labels;
    int hidden = 32;
    int data_n = 512;
    int data_dim = 16;
    // NTK experiment
    int ntk_n = 20;
    int ntk_dim = 8;
    int ntk_width = 2048;
    double ntk_init_scale = 1.0;
    int steps = 100;
    std::string ntk_curvature = "jacobian";
};

void write_model(const std::string& path, const std::vector<Matrix>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    const char magic[8] = {'S', 'E', 'N', 'G', 'M', 'D', 'L', '1'};
    out.write(magic, 8);
    const std::uint32_t count = std::uint32_t(params.size());
    out.write(reinterpret_cast<const char*>(&count), 4);
    for (const Matrix& w : params) {
        const std::uint32_t r = std::uint32_t(w.rows()), c = std::uint32_t(w.cols());
        out.write(reinterpret_cast<const char*>(&r), 4);
        out.write(reinterpret_cast<const char*>(&c), 4);
        out.write(reinterpret_cast<const char*>(w.data()),
                  std::streamsize(w.size() * sizeof(double)));
    }
}

double test_accuracy(const net::Network& network, const Dataset& test) {
    if (test.inputs.rows() == 0) return 0.0;
    const net::ForwardCache cache = network.forward(test.inputs);
    int hits = 0;
    for (int i = 0; i < cache.outputs.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < cache.outputs.cols(); ++j)
            if (cache.outputs(i, j) > cache.outputs(i, best)) best = j;
        if (best == test.labels[i]) ++hits;
    }
    return double(hits) / double(cache.outputs.rows());
}

int run_ntk_mode(const CliSettings& s) {
    NtkProblem problem =
        setup_ntk(s.ntk_n, s.ntk_dim, s.ntk_width, s.ntk_init_scale, s.config.seed);
    NtkRunConfig run;
    run.alpha = s.config.lr;
    run.lambda = s.config.damping;
    run.steps = s.steps;
    run.sketch_q = s.config.sketch_q;
    run.sketch_kind = s.config.sketch_kind;
    run.with_replacement = s.config.sketch_with_replacement;
    run.seed = s.config.seed;
    run.curvature =
        s.ntk_curvature == "efim" ? NtkCurvature::Efim : NtkCurvature::Jacobian;

    const NtkResult result = run_ntk_experiment(problem, run);

    std::filesystem::create_directories(s.out_dir);
    std::ofstream csv(s.out_dir + "/metrics.csv");
    metrics::CsvSink sink(csv);
    for (std::size_t k = 0; k < result.residuals.size(); ++k) {
        metrics::MetricsRecord rec;
        rec.step = long(k);
        rec.epoch = 0;
        rec.train_loss = result.residuals[k];
        rec.grad_norm = k < result.grad_norms.size() ? result.grad_norms[k] : 0.0;
        sink.write(rec);
    }
    write_model(s.out_dir + "/model.bin", {problem.hidden});
    if (result.aborted) {
        emit_error("ntk_diverged", "residual exceeded the abort threshold");
        return 1;
    }
    std::cout << "wrote " << s.out_dir << "/metrics.csv ("
              << result.residuals.size() << " rows)\n";
    return 0;
}

int run_training_mode(const CliSettings& s) {
    Dataset train, test;
    if (s.dataset == "synthetic") {
        train = make_two_blob_classification(s.data_n, s.data_dim, s.config.seed);
        test = make_two_blob_classification(std::max(32, s.data_n / 4), s.data_dim,
                                            derive_seed(s.config.seed, 0x7e57));
    } else {
        const IdxTensor images = load_idx(s.idx_images);
        const IdxTensor labels = load_idx(s.idx_labels);
        train.inputs = idx_to_matrix(images);
        train.labels = idx_to_labels(labels);
        if (int(train.labels.size()) != train.inputs.rows())
            throw DimensionError("idx label count does not match image count");
        train.num_classes = 1 + *std::max_element(train.labels.begin(), train.labels.end());
    }

    const int n_data = train.inputs.rows();
    optim::TrainConfig config = s.config;
    if (config.batch_size > n_data)
        throw DimensionError("batch size exceeds dataset size");
    config.validate();
    if (s.optimizer == "sgd" && config.workers > 1)
        throw DimensionError("workers > 1 requires --optimizer seng");

    if (config.loss == net::LossKind::Mse) {
        // one-hot targets for MSE classification runs
        train.targets = Matrix(n_data, train.num_classes);
        for (int i = 0; i < n_data; ++i) train.targets(i, train.labels[i]) = 1.0;
    }

    net::Network network(
        {net::DenseSpec{train.inputs.cols(), s.hidden}, net::ReluSpec{},
         net::DenseSpec{s.hidden, train.num_classes}},
        derive_seed(config.seed, 0x1417));

    std::filesystem::create_directories(s.out_dir);
    std::ofstream csv(s.out_dir + "/metrics.csv");
    metrics::CsvSink sink(csv);

    const int steps_per_epoch = std::max(1, n_data / config.batch_size);

    optim::SengOptimizer seng_opt(network, config);
    optim::SgdOptimizer sgd_opt(network, config);
    dist::DistributedSengTrainer dist_opt(network, config);
    const bool use_sgd = s.optimizer == "sgd";
    const bool use_dist = !use_sgd && config.workers > 1;

    long step = 0;
    for (int epoch = 0; epoch < config.max_epoch; ++epoch) {
        std::vector<int> order(n_data);
        for (int i = 0; i < n_data; ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(config.seed, 0xE90C, std::uint64_t(epoch)));
        for (int i = n_data - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);

        for (int bs = 0; bs < steps_per_epoch; ++bs) {
            optim::Batch batch;
            batch.inputs = Matrix(config.batch_size, train.inputs.cols());
            if (config.loss == net::LossKind::Mse)
                batch.targets = Matrix(config.batch_size, train.targets.cols());
            batch.labels.resize(config.batch_size);
            for (int i = 0; i < config.batch_size; ++i) {
                const int src = order[bs * config.batch_size + i];
                auto in_row = train.inputs.row(src);
                std::copy(in_row.begin(), in_row.end(), batch.inputs.row(i).begin());
                batch.labels[i] = train.labels[src];
                if (config.loss == net::LossKind::Mse) {
                    auto t_row = train.targets.row(src);
                    std::copy(t_row.begin(), t_row.end(), batch.targets.row(i).begin());
                }
            }

            const double epoch_k = double(step) / double(steps_per_epoch);
            metrics::MetricsRecord rec;
            if (use_dist)
                rec = dist_opt.step(batch, epoch_k);
            else if (use_sgd)
                rec = sgd_opt.step(batch, epoch_k);
            else
                rec = seng_opt.step(batch, epoch_k);

            if (bs == steps_per_epoch - 1 && test.inputs.rows() > 0)
                rec.test_accuracy = test_accuracy(network, test);
            sink.write(rec);
            ++step;
        }
    }

    std::vector<Matrix> params;
    for (int pl = 0; pl < network.num_param_layers(); ++pl) params.push_back(network.param(pl));
    write_model(s.out_dir + "/model.bin", params);
    std::cout << "wrote " << s.out_dir << "/metrics.csv (" << step << " steps)\n";
    return 0;
}

}  // namespace

int run_training_cli(const std::vector<std::string>& args) {
    CLI::App app{"sketched natural-gradient training harness"};
    app.set_config("--config", "", "key=value config file; flags override it");

    CliSettings s;
    optim::TrainConfig& c = s.config;
    std::string sketch_kind = "uniform", lr_schedule = "constant", loss = "cross_entropy",
                routing = "threshold";
    bool no_replacement = false;

    app.add_option("--optimizer", s.optimizer)->check(CLI::IsMember({"seng", "sgd"}));
    app.add_option("--dataset", s.dataset)->check(CLI::IsMember({"synthetic", "ntk", "idx"}));
    app.add_option("--idx-images", s.idx_images);
    app.add_option("--idx-labels", s.idx_labels);
    app.add_option("--batch-size", c.batch_size);
    app.add_option("--epochs", c.max_epoch);
    app.add_option("--lr", c.lr);
    app.add_option("--lr-schedule", lr_schedule)
        ->check(CLI::IsMember({"constant", "cosine", "exp"}));
    app.add_option("--decay-rate", c.decay_rate);
    app.add_option("--warmup-epochs", c.warmup_epochs);
    app.add_option("--warmup-lr", c.warmup_lr);
    app.add_option("--damping", c.damping);
    app.add_option("--damping-factor", c.damping_factor);
    app.add_option("--damping-period", c.damping_period);
    app.add_option("--update-freq", c.update_freq);
    app.add_option("--threshold", c.threshold);
    app.add_option("--sketch", sketch_kind)->check(CLI::IsMember({"uniform", "leverage"}));
    app.add_option("--sketch-size", c.sketch_q);
    app.add_option("--sketch-g", c.sketch_zeta_g);
    app.add_option("--sketch-a", c.sketch_zeta_a);
    app.add_option("--rank", c.rank);
    app.add_option("--workers", c.workers);
    app.add_flag("--stale-coeffs", c.stale_coeffs);
    app.add_option("--seed", c.seed);
    app.add_option("--out", s.out_dir);
    // secondary knobs
    app.add_option("--loss", loss)->check(CLI::IsMember({"cross_entropy", "mse"}));
    app.add_option("--hidden", s.hidden);
    app.add_option("--data-n", s.data_n);
    app.add_option("--data-dim", s.data_dim);
    app.add_flag("--no-replacement", no_replacement);
    app.add_flag("--sketch-literal-scaling", c.sketch_literal_scaling);
    app.add_flag("--uc-exact", c.uc_exact);
    app.add_flag("--record-diagnostics", c.record_diagnostics);
    app.add_option("--routing", routing)->check(CLI::IsMember({"threshold", "factored"}));
    // NTK experiment
    app.add_option("--steps", s.steps);
    app.add_option("--ntk-n", s.ntk_n);
    app.add_option("--ntk-dim", s.ntk_dim);
    app.add_option("--ntk-width", s.ntk_width);
    app.add_option("--ntk-init-scale", s.ntk_init_scale);
    app.add_option("--ntk-curvature", s.ntk_curvature)
        ->check(CLI::IsMember({"jacobian", "efim"}));

    std::vector<std::string> argv_storage = args;
    std::vector<char*> argv;
    argv.push_back(const_cast<char*>("seng_train"));
    for (std::string& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("invalid_arguments", e.what());
        const int code = e.get_exit_code();
        return code == 0 ? 2 : code;
    }

    c.sketch_kind = sketch_kind == "leverage" ? sketch::SketchKind::Leverage
                                              : sketch::SketchKind::Uniform;
    c.lr_schedule = lr_schedule == "cosine"   ? optim::LrScheduleKind::Cosine
                    : lr_schedule == "exp"    ? optim::LrScheduleKind::Exp
                                              : optim::LrScheduleKind::Constant;
    c.loss = loss == "mse" ? net::LossKind::Mse : net::LossKind::CrossEntropy;
    c.routing = routing == "factored" ? curvature::RoutingRule::FactorInequality
                                      : curvature::RoutingRule::ParamThreshold;
    c.sketch_with_replacement = !no_replacement;
    if (c.warmup_epochs > 0 && c.warmup_lr <= 0.0) c.warmup_lr = c.lr / 10.0;

    try {
        if (s.dataset == "ntk") return run_ntk_mode(s);
        if (s.dataset == "idx" && (s.idx_images.empty() || s.idx_labels.empty()))
            throw DimensionError("--dataset idx requires --idx-images and --idx-labels");
        return run_training_mode(s);
    } catch (const FormatError& e) {
        emit_error("format_error", e.what());
        return 1;
    } catch (const optim::NonFiniteLossError& e) {
        emit_error("non_finite_loss", e.what());
        return 1;
    } catch (const Error& e) {
        emit_error("invalid_config", e.what());
        return 2;
    } catch (const std::exception& e) {
        emit_error("runtime_error", e.what());
        return 1;
    }
}

}  // namespace seng::harness
