#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "swagbench/bench.hpp"

namespace {

using namespace swagbench;

void print_summary(const std::vector<bench::BackendSummary>& summary) {
    std::printf("%-10s %12s %12s %12s %12s %8s %8s\n", "backend", "total_wall",
                "total_sim", "epoch_mean", "epoch_std", "r_wall", "r_sim");
    for (const auto& s : summary)
        std::printf("%-10s %12.6f %12.6f %12.6f %12.6f %8.3f %8.3f\n",
                    s.backend.c_str(), s.total_wall, s.total_simulated,
                    s.epoch_mean_wall, s.epoch_std_wall, s.ratio_wall,
                    s.ratio_simulated);
}

int cmd_run(const std::string& config_path) {
    bench::ExperimentSpec spec = bench::load_experiment_spec(config_path);
    bench::ExperimentResult result = bench::run_experiment(spec);
    std::filesystem::create_directories(spec.output_dir);
    bench::emit_records_csv(result.records, spec.output_dir + "/records.csv");
    bench::emit_records_json(result.records,
                             spec.output_dir + "/records.json");
    train::MlpModel model(spec.layer_sizes, spec.train.rng_seed);
    bench::SizeInfo size{model.parameter_count(),
                         spec.swag.max_columns,
                         spec.swag.element_width};
    auto summary = bench::summarize(result.records, size);
    bench::emit_summary_json(summary, spec.output_dir + "/summary.json");
    for (std::size_t rep = 0; rep < result.checkpoints.size(); ++rep) {
        const std::string path = spec.output_dir + "/posterior_rep" +
                                 std::to_string(rep) + ".swag";
        std::ofstream out(path, std::ios::binary);
        out << result.checkpoints[rep];
        if (!out) throw StorageError("run: cannot write '" + path + "'");
    }
    print_summary(summary);
    std::printf("wrote %s/{records.csv,records.json,summary.json}\n",
                spec.output_dir.c_str());
    return 0;
}

int cmd_summarize(const std::string& dir) {
    auto records = bench::load_records_csv(dir + "/records.csv");
    auto summary = bench::summarize(records);
    bench::emit_summary_json(summary, dir + "/summary.json");
    print_summary(summary);
    return 0;
}

int cmd_layout(std::size_t rows, std::size_t cols,
               const std::string& backend_spec) {
    auto cfg = bench::parse_backend_spec(backend_spec);
    auto reports = bench::layout_pathology(rows, cols, cfg);
    std::printf("%-9s %12s %12s %12s %12s %12s\n", "layout", "transfers",
                "misses", "evictions", "wall_s", "sim_s");
    for (const auto& r : reports)
        std::printf("%-9s %12llu %12llu %12llu %12.6f %12.6f\n",
                    store::to_string(r.layout),
                    static_cast<unsigned long long>(r.transfers),
                    static_cast<unsigned long long>(r.cache_misses),
                    static_cast<unsigned long long>(r.evictions),
                    r.wall_seconds, r.simulated_seconds);
    return 0;
}

struct TrainOptions {
    std::size_t synthetic_n = 2000;
    std::string mnist_images, mnist_labels;
    std::string layers = "desk";
    train::TrainConfig config;
};

std::vector<std::size_t> layer_sizes_for(const std::string& name) {
    if (name == "desk") return train::MlpModel::desk_scale_sizes();
    if (name == "paper-size") return train::MlpModel::paper_scale_sizes();
    throw ConfigError("unknown layer preset '" + name + "'");
}

train::Dataset dataset_for(const TrainOptions& opt, std::size_t input_dim,
                           std::size_t classes) {
    if (!opt.mnist_images.empty() && !opt.mnist_labels.empty())
        return train::load_mnist(opt.mnist_images, opt.mnist_labels);
    return train::synthetic_dataset(7, opt.synthetic_n, input_dim, classes);
}

int cmd_train(const TrainOptions& opt) {
    const auto sizes = layer_sizes_for(opt.layers);
    train::MlpModel model(sizes, opt.config.rng_seed);
    const auto data = dataset_for(opt, sizes.front(), sizes.back());
    std::mt19937_64 rng(opt.config.rng_seed);
    for (std::size_t epoch = 0; epoch < opt.config.epochs; ++epoch) {
        const double loss =
            train::sgd_epoch(model, data, opt.config, rng, nullptr);
        std::printf("epoch %zu loss %.6f\n", epoch, loss);
    }
    return 0;
}

int cmd_eval(const TrainOptions& opt, std::size_t burn_in,
             std::size_t max_columns, std::size_t samples, double scale) {
    const auto sizes = layer_sizes_for(opt.layers);
    train::MlpModel model(sizes, opt.config.rng_seed);
    const auto data = dataset_for(opt, sizes.front(), sizes.back());
    swag::SwagConfig swag_cfg;
    swag_cfg.burn_in = burn_in;
    swag_cfg.max_columns = max_columns;
    swag_cfg.scale = scale;
    swag::SwagState state =
        swag::SwagState::in_memory(model.parameter_count(), swag_cfg);
    std::mt19937_64 rng(opt.config.rng_seed);
    for (std::size_t epoch = 0; epoch < opt.config.epochs; ++epoch)
        train::sgd_epoch(model, data, opt.config, rng,
                         [&](const std::vector<double>& p) { state.update(p); });

    const auto point = eval::point_predict(model, data.inputs, data.size());
    std::cout << eval::metrics_record(point, eval::evaluate(point, data.labels),
                                      opt.config.rng_seed)
              << '\n';
    const auto bma = eval::bma_predict(model, state, data.inputs, data.size(),
                                       samples, opt.config.rng_seed);
    std::cout << eval::metrics_record(bma, eval::evaluate(bma, data.labels),
                                      opt.config.rng_seed)
              << '\n';
    return 0;
}

int cmd_size(std::uint64_t params, std::uint64_t rank, std::uint64_t width) {
    const std::uint64_t bytes = swag::estimate_size(params, rank, width);
    std::printf("%llu bytes (%.3f GiB)\n",
                static_cast<unsigned long long>(bytes),
                static_cast<double>(bytes) / 1073741824.0);
    return 0;
}

void add_train_options(CLI::App* app, TrainOptions& opt) {
    app->add_option("--synthetic-n", opt.synthetic_n,
                    "synthetic dataset size");
    app->add_option("--mnist-images", opt.mnist_images,
                    "path to IDX image file");
    app->add_option("--mnist-labels", opt.mnist_labels,
                    "path to IDX label file");
    app->add_option("--layers", opt.layers, "layer preset: desk | paper-size");
    app->add_option("--minibatch-size", opt.config.minibatch_size);
    app->add_option("--minibatches", opt.config.minibatches_per_epoch,
                    "minibatches per epoch");
    app->add_option("--epochs", opt.config.epochs);
    app->add_option("--lr", opt.config.learning_rate);
    app->add_option("--seed", opt.config.rng_seed);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SWAG posterior storage benchmark harness"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "run a benchmark experiment");
    run->add_option("--config", config_path, "JSON experiment config")
        ->required();

    std::string summarize_dir;
    auto* summ = app.add_subcommand("summarize", "summarize emitted records");
    summ->add_option("dir", summarize_dir, "directory with records.csv")
        ->required();

    std::size_t rows = 0, cols = 0;
    std::string backend_spec = "inmemory,acct";
    auto* layout = app.add_subcommand(
        "layout", "compare row/column-major column-write behavior");
    layout->add_option("--rows", rows)->required();
    layout->add_option("--cols", cols)->required();
    layout->add_option("--backend", backend_spec,
                       "e.g. simpmem,lambda=3 or tiered,capacity=65536");

    TrainOptions train_opt;
    auto* train_cmd = app.add_subcommand("train", "train the MLP");
    add_train_options(train_cmd, train_opt);

    TrainOptions eval_opt;
    std::size_t burn_in = 300, max_columns = 512, samples = 30;
    double scale = 1.0;
    auto* eval_cmd = app.add_subcommand(
        "eval", "train, build the posterior, and report BMA metrics");
    add_train_options(eval_cmd, eval_opt);
    eval_cmd->add_option("--burn-in", burn_in);
    eval_cmd->add_option("--max-columns", max_columns);
    eval_cmd->add_option("--samples", samples, "posterior samples for BMA");
    eval_cmd->add_option("--scale", scale, "posterior sampling scale");

    std::uint64_t params = 0, rank = 0, width = 4;
    auto* size_cmd =
        app.add_subcommand("size", "posterior size for a model/rank pair");
    size_cmd->add_option("--params", params)->required();
    size_cmd->add_option("--rank", rank)->required();
    size_cmd->add_option("--width", width, "bytes per element");

    try {
        app.parse(argc, argv);
        if (*run) return cmd_run(config_path);
        if (*summ) return cmd_summarize(summarize_dir);
        if (*layout) return cmd_layout(rows, cols, backend_spec);
        if (*train_cmd) return cmd_train(train_opt);
        if (*eval_cmd)
            return cmd_eval(eval_opt, burn_in, max_columns, samples, scale);
        if (*size_cmd) return cmd_size(params, rank, width);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;  // usage errors -> 1
    } catch (const swagbench::StorageError& e) {
        std::cerr << "storage error: " << e.what() << '\n';
        return 3;
    } catch (const swagbench::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return 4;
    } catch (const swagbench::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const swagbench::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
