#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "swagbench/bayes_eval.hpp"
#include "swagbench/swag.hpp"
#include "swagbench/tensor_store.hpp"
#include "swagbench/trainer.hpp"
#include "swagbench/write_coalescer.hpp"

namespace swagbench::bench {

enum class Phase : std::uint8_t {
    Alloc,
    Train,
    PosteriorUpdate,
    Flush,
    Sample,
};

const char* to_string(Phase phase);

struct DatasetSpec {
    std::size_t synthetic_n = 2000;
    std::uint64_t synthetic_seed = 7;
    std::string mnist_images;  // when both paths set, MNIST wins
    std::string mnist_labels;
};

struct ExperimentSpec {
    store::BackendConfig backend;
    train::TrainConfig train;
    swag::SwagConfig swag;
    std::size_t repetitions = 3;
    std::optional<store::CoalescerConfig> coalescer;
    store::Layout layout = store::Layout::ColMajor;
    std::string output_dir = "bench_out";
    DatasetSpec dataset;
    std::vector<std::size_t> layer_sizes = train::MlpModel::desk_scale_sizes();
    std::size_t sample_draws = 1;  // posterior draws per epoch (0 skips)

    void validate() const;
};

struct TimingRecord {
    std::string backend_label;
    std::size_t repetition = 0;
    std::size_t epoch = 0;
    Phase phase = Phase::Train;
    double wall_seconds = 0.0;
    double simulated_seconds = 0.0;
    std::uint64_t bytes_read = 0;
    std::uint64_t bytes_written = 0;
    std::uint64_t cache_misses = 0;
    std::uint64_t evictions = 0;
};

struct ExperimentResult {
    std::vector<TimingRecord> records;
    // Final posterior checkpoint bytes per repetition; identical across
    // backends and coalescer settings for a fixed seed.
    std::vector<std::string> checkpoints;
};

/// Runs the full protocol: timed allocation, epochs of SGD with a posterior
/// update after every minibatch, a flush and optional sample draws per
/// epoch, repeated `repetitions` times.
ExperimentResult run_experiment(const ExperimentSpec& spec);

struct BackendSummary {
    std::string backend;
    double total_wall = 0.0;
    double total_simulated = 0.0;
    double epoch_mean_wall = 0.0;
    double epoch_std_wall = 0.0;
    double epoch_mean_simulated = 0.0;
    double epoch_std_simulated = 0.0;
    double ratio_wall = 1.0;       // vs the InMemory baseline
    double ratio_simulated = 1.0;  // on the virtual clock
    std::uint64_t posterior_bytes = 0;
};

struct SizeInfo {
    std::uint64_t params = 0;
    std::uint64_t rank = 0;
    std::uint64_t element_width = 4;
};

/// Per-backend totals, per-epoch mean/std across repetitions, and ratios
/// against the InMemory baseline. Throws when a ratio is requested and no
/// InMemory records exist.
std::vector<BackendSummary> summarize(const std::vector<TimingRecord>& records,
                                      const SizeInfo& size = {});

struct LayoutReport {
    store::Layout layout = store::Layout::ColMajor;
    std::uint64_t transfers = 0;
    std::uint64_t cache_misses = 0;
    std::uint64_t evictions = 0;
    double wall_seconds = 0.0;
    double simulated_seconds = 0.0;
};

/// Repeated column writes under both layouts on fresh instances of the
/// given backend; `passes` full sweeps over all columns.
std::vector<LayoutReport> layout_pathology(std::size_t rows, std::size_t cols,
                                           const store::BackendConfig& backend,
                                           std::size_t passes = 3);

// File emission and re-ingestion (CSV schema is fixed; see the CSV header
// constant). JSON files round-trip through a re-parse.
extern const char* kRecordsCsvHeader;

void emit_records_csv(const std::vector<TimingRecord>& records,
                      const std::string& path);
void emit_records_json(const std::vector<TimingRecord>& records,
                       const std::string& path);
void emit_summary_json(const std::vector<BackendSummary>& summary,
                       const std::string& path);
std::vector<TimingRecord> load_records_csv(const std::string& path);

// Config ingestion for the CLI.
ExperimentSpec parse_experiment_spec_json(const std::string& text);
ExperimentSpec load_experiment_spec(const std::string& path);
store::BackendConfig parse_backend_spec(const std::string& text);

}  // namespace swagbench::bench
