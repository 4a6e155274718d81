#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "swagbench/bench.hpp"

using namespace swagbench;
using namespace swagbench::bench;

namespace {

ExperimentSpec tiny_spec() {
    ExperimentSpec spec;
    spec.layer_sizes = {4, 6, 3};
    spec.train.minibatch_size = 5;
    spec.train.minibatches_per_epoch = 10;
    spec.train.epochs = 2;
    spec.train.learning_rate = 0.05;
    spec.train.rng_seed = 3;
    spec.swag.max_columns = 4;
    spec.repetitions = 2;
    spec.dataset.synthetic_n = 40;
    spec.sample_draws = 1;
    return spec;
}

TimingRecord record(const std::string& label, std::size_t rep,
                    std::size_t epoch, Phase phase, double wall, double sim) {
    TimingRecord r;
    r.backend_label = label;
    r.repetition = rep;
    r.epoch = epoch;
    r.phase = phase;
    r.wall_seconds = wall;
    r.simulated_seconds = sim;
    return r;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("bench_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const {
        return (path / name).string();
    }
};

}  // namespace

TEST_CASE("run_experiment emits one record per phase per epoch per rep") {
    const auto spec = tiny_spec();
    const auto result = run_experiment(spec);
    // Per repetition: alloc + 2 epochs x (train, update, flush, sample).
    REQUIRE(result.records.size() == 2 * (1 + 2 * 4));
    std::size_t allocs = 0, updates = 0, samples = 0;
    for (const auto& r : result.records) {
        CHECK(r.backend_label == "inmemory");
        CHECK(r.wall_seconds >= 0.0);
        allocs += r.phase == Phase::Alloc;
        updates += r.phase == Phase::PosteriorUpdate;
        samples += r.phase == Phase::Sample;
        if (r.phase == Phase::PosteriorUpdate)
            CHECK(r.bytes_written > 0);  // 10 deviation column writes
    }
    CHECK(allocs == 2);
    CHECK(updates == 4);
    CHECK(samples == 4);
    REQUIRE(result.checkpoints.size() == 2);
    CHECK(result.checkpoints[0] == result.checkpoints[1]);
}

TEST_CASE("final checkpoints agree across backends and coalescing") {
    TempDir dir;
    auto spec = tiny_spec();
    spec.repetitions = 1;
    const auto reference = run_experiment(spec).checkpoints.at(0);

    auto variant = spec;
    variant.backend.kind = store::BackendKind::SimulatedPMem;
    CHECK(run_experiment(variant).checkpoints.at(0) == reference);

    variant = spec;
    variant.backend.kind = store::BackendKind::MappedFile;
    variant.backend.directory = dir.path.string();
    CHECK(run_experiment(variant).checkpoints.at(0) == reference);

    variant = spec;
    variant.backend.kind = store::BackendKind::TieredCache;
    variant.backend.cache_capacity_bytes = 4096;
    variant.backend.block_size_bytes = 256;
    CHECK(run_experiment(variant).checkpoints.at(0) == reference);

    variant = spec;
    variant.coalescer = store::CoalescerConfig{.capacity_columns = 3};
    CHECK(run_experiment(variant).checkpoints.at(0) == reference);
}

TEST_CASE("summarize computes totals, epoch stats, and baseline ratios") {
    std::vector<TimingRecord> records;
    records.push_back(record("inmemory", 0, 0, Phase::Alloc, 5.0, 0.0));
    for (std::size_t rep = 0; rep < 2; ++rep)
        for (std::size_t epoch = 0; epoch < 2; ++epoch) {
            records.push_back(
                record("inmemory", rep, epoch, Phase::Train, 1.0, 0.0));
            records.push_back(record("inmemory", rep, epoch,
                                     Phase::PosteriorUpdate, 0.5, 2.0));
            records.push_back(
                record("simpmem", rep, epoch, Phase::Train, 1.0, 0.0));
            records.push_back(record("simpmem", rep, epoch,
                                     Phase::PosteriorUpdate, 0.5, 6.0));
        }
    SizeInfo size{.params = 100, .rank = 10, .element_width = 4};
    const auto summary = summarize(records, size);
    REQUIRE(summary.size() == 2);
    const auto& mem = summary[0];
    const auto& pm = summary[1];
    CHECK(mem.backend == "inmemory");
    CHECK(pm.backend == "simpmem");
    // Totals include the alloc record; epoch stats do not.
    CHECK(mem.total_wall == doctest::Approx(5.0 + 4 * 1.5));
    CHECK(mem.epoch_mean_wall == doctest::Approx(1.5));
    CHECK(mem.epoch_std_wall == doctest::Approx(0.0));
    CHECK(mem.epoch_mean_simulated == doctest::Approx(2.0));
    CHECK(mem.ratio_wall == doctest::Approx(1.0));
    CHECK(mem.ratio_simulated == doctest::Approx(1.0));
    CHECK(pm.ratio_simulated == doctest::Approx(3.0));
    CHECK(pm.epoch_std_simulated == doctest::Approx(0.0));
    CHECK(mem.posterior_bytes == swag::estimate_size(100, 10, 4));

    SUBCASE("missing baseline") {
        std::vector<TimingRecord> orphan{
            record("simpmem", 0, 0, Phase::Train, 1.0, 1.0)};
        CHECK_THROWS_AS(summarize(orphan), ConfigError);
    }
    SUBCASE("no records") {
        CHECK_THROWS_AS(summarize({}), DataError);
    }
}

TEST_CASE("layout pathology: row-major column writes multiply transfers") {
    store::BackendConfig cfg;
    cfg.kind = store::BackendKind::SimulatedPMem;
    const auto reports = layout_pathology(8, 16, cfg, 2);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].layout == store::Layout::ColMajor);
    CHECK(reports[1].layout == store::Layout::RowMajor);
    CHECK(reports[0].transfers == 16 * 2);      // one per column write
    CHECK(reports[1].transfers == 8 * 16 * 2);  // one per row touched
    CHECK(reports[1].simulated_seconds > reports[0].simulated_seconds);
}

TEST_CASE("records CSV: exact header, stable round trip") {
    TempDir dir;
    const std::string path = dir.file("records.csv");
    std::vector<TimingRecord> records;
    auto r = record("simpmem", 1, 2, Phase::PosteriorUpdate, 0.125, 1.5);
    r.bytes_read = 10;
    r.bytes_written = 20;
    r.cache_misses = 3;
    r.evictions = 1;
    records.push_back(r);
    records.push_back(record("inmemory", 0, 0, Phase::Alloc, 0.0, 0.0));
    emit_records_csv(records, path);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "backend,repetition,epoch,phase,wall_seconds,simulated_seconds,"
          "bytes_read,bytes_written,cache_misses,evictions");
    std::string row;
    std::getline(in, row);
    CHECK(row == "simpmem,1,2,posterior_update,0.125000,1.500000,10,20,3,1");

    const auto loaded = load_records_csv(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].backend_label == "simpmem");
    CHECK(loaded[0].phase == Phase::PosteriorUpdate);
    CHECK(loaded[0].wall_seconds == 0.125);
    CHECK(loaded[0].simulated_seconds == 1.5);
    CHECK(loaded[0].bytes_written == 20);
    CHECK(loaded[1].phase == Phase::Alloc);

    SUBCASE("empty record set is header-only and loads back empty") {
        const std::string empty_path = dir.file("empty.csv");
        emit_records_csv({}, empty_path);
        CHECK(load_records_csv(empty_path).empty());
    }
    SUBCASE("corrupted header is rejected") {
        std::ofstream bad(dir.file("bad.csv"));
        bad << "nope\n";
        bad.close();
        CHECK_THROWS_AS(load_records_csv(dir.file("bad.csv")), FormatError);
    }
}

TEST_CASE("experiment config parses from JSON") {
    const std::string text = R"({
        "backend": {"kind": "simpmem", "lambda": 4.0, "alloc_penalty": 0.5},
        "train": {"minibatch_size": 10, "minibatches_per_epoch": 20,
                  "epochs": 3, "learning_rate": 0.01, "rng_seed": 9},
        "swag": {"burn_in": 5, "max_columns": 8, "element_width": 8},
        "repetitions": 4,
        "coalescer": {"coalesce_columns": 16, "flush_policy": "explicit"},
        "layout": "rowmajor",
        "output_dir": "out",
        "dataset": {"synthetic_n": 123, "synthetic_seed": 5},
        "layer_sizes": [4, 8, 2],
        "sample_draws": 2
    })";
    const auto spec = parse_experiment_spec_json(text);
    CHECK(spec.backend.kind == store::BackendKind::SimulatedPMem);
    CHECK(spec.backend.latency.lambda == 4.0);
    CHECK(spec.backend.alloc_penalty == 0.5);
    CHECK(spec.train.minibatches_per_epoch == 20);
    CHECK(spec.train.epochs == 3);
    CHECK(spec.swag.burn_in == 5);
    CHECK(spec.swag.element_width == 8);
    CHECK(spec.repetitions == 4);
    REQUIRE(spec.coalescer.has_value());
    CHECK(spec.coalescer->capacity_columns == 16);
    CHECK(spec.coalescer->flush_policy == store::FlushPolicy::Explicit);
    CHECK(spec.layout == store::Layout::RowMajor);
    CHECK(spec.dataset.synthetic_n == 123);
    CHECK(spec.layer_sizes == std::vector<std::size_t>{4, 8, 2});
    CHECK(spec.sample_draws == 2);

    SUBCASE("layer presets by name") {
        const auto desk = parse_experiment_spec_json(
            R"({"layer_sizes": "desk"})");
        CHECK(desk.layer_sizes == train::MlpModel::desk_scale_sizes());
        const auto paper = parse_experiment_spec_json(
            R"({"layer_sizes": "paper-size"})");
        CHECK(paper.layer_sizes == train::MlpModel::paper_scale_sizes());
    }
    SUBCASE("defaults survive an empty object") {
        const auto d = parse_experiment_spec_json("{}");
        CHECK(d.backend.kind == store::BackendKind::InMemory);
        CHECK(d.train.minibatch_size == 100);
        CHECK(d.train.minibatches_per_epoch == 600);
        CHECK(d.repetitions == 3);
        CHECK_FALSE(d.coalescer.has_value());
    }
    SUBCASE("malformed JSON") {
        CHECK_THROWS_AS(parse_experiment_spec_json("{nope"), FormatError);
    }
    SUBCASE("bad enum values") {
        CHECK_THROWS_AS(
            parse_experiment_spec_json(R"({"layout": "diagonal"})"),
            ConfigError);
        CHECK_THROWS_AS(
            parse_experiment_spec_json(R"({"backend": {"kind": "tape"}})"),
            ConfigError);
    }
}

TEST_CASE("backend spec strings") {
    const auto pm = parse_backend_spec("simpmem,lambda=3,alloc=0.25");
    CHECK(pm.kind == store::BackendKind::SimulatedPMem);
    CHECK(pm.latency.lambda == 3.0);
    CHECK(pm.alloc_penalty == 0.25);

    const auto tiered =
        parse_backend_spec("tiered,capacity=8192,block=512,backing=simpmem");
    CHECK(tiered.kind == store::BackendKind::TieredCache);
    CHECK(tiered.cache_capacity_bytes == 8192);
    CHECK(tiered.block_size_bytes == 512);
    REQUIRE(tiered.backing);
    CHECK(tiered.backing->kind == store::BackendKind::SimulatedPMem);

    const auto mem = parse_backend_spec("inmemory,acct");
    CHECK(mem.kind == store::BackendKind::InMemory);
    CHECK(mem.accounting);

    CHECK_THROWS_AS(parse_backend_spec(""), ConfigError);
    CHECK_THROWS_AS(parse_backend_spec("floppy"), ConfigError);
    CHECK_THROWS_AS(parse_backend_spec("inmemory,warp=9"), ConfigError);
}
