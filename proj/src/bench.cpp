#include "swagbench/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace swagbench::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct StatsDelta {
    double simulated = 0.0;
    std::uint64_t bytes_read = 0, bytes_written = 0;
    std::uint64_t cache_misses = 0, evictions = 0;

    static StatsDelta between(const store::BackendStats& before,
                              const store::BackendStats& after) {
        StatsDelta d;
        d.simulated = after.simulated_time - before.simulated_time;
        d.bytes_read = after.bytes_read - before.bytes_read;
        d.bytes_written = after.bytes_written - before.bytes_written;
        d.cache_misses = after.cache_misses - before.cache_misses;
        d.evictions = after.evictions - before.evictions;
        return d;
    }

    void add(const StatsDelta& o) {
        simulated += o.simulated;
        bytes_read += o.bytes_read;
        bytes_written += o.bytes_written;
        cache_misses += o.cache_misses;
        evictions += o.evictions;
    }
};

TimingRecord make_record(const std::string& label, std::size_t rep,
                         std::size_t epoch, Phase phase, double wall,
                         const StatsDelta& delta) {
    TimingRecord r;
    r.backend_label = label;
    r.repetition = rep;
    r.epoch = epoch;
    r.phase = phase;
    r.wall_seconds = wall;
    r.simulated_seconds = delta.simulated;
    r.bytes_read = delta.bytes_read;
    r.bytes_written = delta.bytes_written;
    r.cache_misses = delta.cache_misses;
    r.evictions = delta.evictions;
    return r;
}

}  // namespace

const char* to_string(Phase phase) {
    switch (phase) {
        case Phase::Alloc: return "alloc";
        case Phase::Train: return "train";
        case Phase::PosteriorUpdate: return "posterior_update";
        case Phase::Flush: return "flush";
        case Phase::Sample: return "sample";
    }
    return "?";
}

static Phase phase_from_string(const std::string& s) {
    if (s == "alloc") return Phase::Alloc;
    if (s == "train") return Phase::Train;
    if (s == "posterior_update") return Phase::PosteriorUpdate;
    if (s == "flush") return Phase::Flush;
    if (s == "sample") return Phase::Sample;
    throw FormatError("unknown phase '" + s + "'");
}

void ExperimentSpec::validate() const {
    if (repetitions == 0)
        throw ConfigError("experiment: repetitions must be >= 1");
    train.validate();
    if (layer_sizes.size() < 2)
        throw ConfigError("experiment: need at least two layer sizes");
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    train::Dataset data;
    if (!spec.dataset.mnist_images.empty() &&
        !spec.dataset.mnist_labels.empty())
        data = train::load_mnist(spec.dataset.mnist_images,
                                 spec.dataset.mnist_labels);
    else
        data = train::synthetic_dataset(spec.dataset.synthetic_seed,
                                        spec.dataset.synthetic_n,
                                        spec.layer_sizes.front(),
                                        spec.layer_sizes.back());

    ExperimentResult result;
    for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
        auto backend = store::make_backend(spec.backend);
        const std::string label = store::to_string(backend->kind());
        train::MlpModel model(spec.layer_sizes, spec.train.rng_seed);
        const std::size_t dim = model.parameter_count();

        auto stats0 = backend->stats();
        auto t0 = Clock::now();
        swag::SwagState state(dim, spec.swag, backend, "posterior",
                              spec.coalescer, spec.layout);
        result.records.push_back(make_record(
            label, rep, 0, Phase::Alloc, seconds_since(t0),
            StatsDelta::between(stats0, backend->stats())));

        std::mt19937_64 rng(spec.train.rng_seed);
        train::TrainConfig epoch_cfg = spec.train;
        for (std::size_t epoch = 0; epoch < spec.train.epochs; ++epoch) {
            double update_wall = 0.0;
            StatsDelta update_delta;
            auto observer = [&](const std::vector<double>& params) {
                const auto s0 = backend->stats();
                const auto u0 = Clock::now();
                state.update(params);
                update_wall += seconds_since(u0);
                update_delta.add(StatsDelta::between(s0, backend->stats()));
            };
            const auto e0 = Clock::now();
            train::sgd_epoch(model, data, epoch_cfg, rng, observer);
            const double epoch_wall = seconds_since(e0);
            result.records.push_back(make_record(label, rep, epoch,
                                                 Phase::Train,
                                                 epoch_wall - update_wall,
                                                 StatsDelta{}));
            result.records.push_back(make_record(label, rep, epoch,
                                                 Phase::PosteriorUpdate,
                                                 update_wall, update_delta));

            stats0 = backend->stats();
            t0 = Clock::now();
            state.flush();
            result.records.push_back(make_record(
                label, rep, epoch, Phase::Flush, seconds_since(t0),
                StatsDelta::between(stats0, backend->stats())));

            if (spec.sample_draws > 0) {
                stats0 = backend->stats();
                t0 = Clock::now();
                for (std::size_t s = 0; s < spec.sample_draws; ++s)
                    state.sample(spec.train.rng_seed + epoch * 1000 + s);
                result.records.push_back(make_record(
                    label, rep, epoch, Phase::Sample, seconds_since(t0),
                    StatsDelta::between(stats0, backend->stats())));
            }
        }
        std::ostringstream sink(std::ios::binary);
        state.checkpoint(sink);
        result.checkpoints.push_back(std::move(sink).str());
    }
    return result;
}

std::vector<BackendSummary> summarize(const std::vector<TimingRecord>& records,
                                      const SizeInfo& size) {
    if (records.empty()) throw DataError("summarize: no records");
    std::vector<std::string> order;
    std::map<std::string, std::vector<const TimingRecord*>> groups;
    for (const TimingRecord& r : records) {
        if (!groups.count(r.backend_label)) order.push_back(r.backend_label);
        groups[r.backend_label].push_back(&r);
    }
    const bool need_ratio = true;
    const auto baseline = groups.find("inmemory");
    if (need_ratio && baseline == groups.end())
        throw ConfigError(
            "summarize: no inmemory baseline records for ratios");
    auto totals = [](const std::vector<const TimingRecord*>& rs) {
        double wall = 0.0, sim = 0.0;
        for (const TimingRecord* r : rs) {
            wall += r->wall_seconds;
            sim += r->simulated_seconds;
        }
        return std::pair{wall, sim};
    };
    const auto [base_wall, base_sim] = totals(baseline->second);
    std::vector<BackendSummary> out;
    for (const std::string& label : order) {
        const auto& rs = groups[label];
        BackendSummary s;
        s.backend = label;
        std::tie(s.total_wall, s.total_simulated) = totals(rs);
        // Per-epoch runtime excludes the one-off allocation phase.
        std::map<std::pair<std::size_t, std::size_t>, std::pair<double, double>>
            epochs;
        for (const TimingRecord* r : rs) {
            if (r->phase == Phase::Alloc) continue;
            auto& e = epochs[{r->repetition, r->epoch}];
            e.first += r->wall_seconds;
            e.second += r->simulated_seconds;
        }
        auto mean_std = [&](auto pick) {
            double mean = 0.0;
            for (const auto& [k, v] : epochs) mean += pick(v);
            mean /= epochs.empty() ? 1.0 : double(epochs.size());
            double var = 0.0;
            for (const auto& [k, v] : epochs) {
                const double d = pick(v) - mean;
                var += d * d;
            }
            const double std_dev =
                epochs.size() > 1 ? std::sqrt(var / (epochs.size() - 1)) : 0.0;
            return std::pair{mean, std_dev};
        };
        std::tie(s.epoch_mean_wall, s.epoch_std_wall) =
            mean_std([](const auto& v) { return v.first; });
        std::tie(s.epoch_mean_simulated, s.epoch_std_simulated) =
            mean_std([](const auto& v) { return v.second; });
        s.ratio_wall = base_wall > 0.0 ? s.total_wall / base_wall : 1.0;
        s.ratio_simulated =
            base_sim > 0.0 ? s.total_simulated / base_sim : 1.0;
        if (size.params > 0)
            s.posterior_bytes =
                swag::estimate_size(size.params, size.rank,
                                    size.element_width);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<LayoutReport> layout_pathology(std::size_t rows, std::size_t cols,
                                           const store::BackendConfig& backend,
                                           std::size_t passes) {
    if (rows == 0 || cols == 0)
        throw ConfigError("layout: dimensions must be >= 1");
    std::vector<LayoutReport> reports;
    for (store::Layout layout :
         {store::Layout::ColMajor, store::Layout::RowMajor}) {
        auto b = store::make_backend(backend);
        auto handle = b->create_array("layout_probe", rows, cols, 4, layout);
        b->reset_stats();
        std::vector<std::byte> column(rows * 4);
        for (std::size_t i = 0; i < column.size(); ++i)
            column[i] = std::byte(i & 0xff);
        const auto t0 = Clock::now();
        for (std::size_t pass = 0; pass < passes; ++pass)
            for (std::size_t c = 0; c < cols; ++c)
                b->write_column(handle, c, column);
        const double wall = seconds_since(t0);
        const auto stats = b->stats();
        LayoutReport r;
        r.layout = layout;
        r.transfers = stats.transfers;
        r.cache_misses = stats.cache_misses;
        r.evictions = stats.evictions;
        r.wall_seconds = wall;
        r.simulated_seconds = stats.simulated_time;
        reports.push_back(r);
    }
    return reports;
}

const char* kRecordsCsvHeader =
    "backend,repetition,epoch,phase,wall_seconds,simulated_seconds,"
    "bytes_read,bytes_written,cache_misses,evictions";

void emit_records_csv(const std::vector<TimingRecord>& records,
                      const std::string& path) {
    std::ofstream out(path);
    if (!out) throw StorageError("emit: cannot open '" + path + "'");
    out << kRecordsCsvHeader << '\n';
    char buf[64];
    for (const TimingRecord& r : records) {
        out << r.backend_label << ',' << r.repetition << ',' << r.epoch << ','
            << to_string(r.phase) << ',';
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", r.wall_seconds,
                      r.simulated_seconds);
        out << buf << ',' << r.bytes_read << ',' << r.bytes_written << ','
            << r.cache_misses << ',' << r.evictions << '\n';
    }
    if (!out) throw StorageError("emit: write failed for '" + path + "'");
}

namespace {

nlohmann::json record_to_json(const TimingRecord& r) {
    return {{"backend", r.backend_label},
            {"repetition", r.repetition},
            {"epoch", r.epoch},
            {"phase", to_string(r.phase)},
            {"wall_seconds", r.wall_seconds},
            {"simulated_seconds", r.simulated_seconds},
            {"bytes_read", r.bytes_read},
            {"bytes_written", r.bytes_written},
            {"cache_misses", r.cache_misses},
            {"evictions", r.evictions}};
}

}  // namespace

void emit_records_json(const std::vector<TimingRecord>& records,
                       const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const TimingRecord& r : records) arr.push_back(record_to_json(r));
    std::ofstream out(path);
    if (!out) throw StorageError("emit: cannot open '" + path + "'");
    out << arr.dump(2) << '\n';
}

void emit_summary_json(const std::vector<BackendSummary>& summary,
                       const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const BackendSummary& s : summary) {
        arr.push_back(
            {{"backend", s.backend},
             {"total_wall", s.total_wall},
             {"total_simulated", s.total_simulated},
             {"epoch_mean_wall", s.epoch_mean_wall},
             {"epoch_std_wall", s.epoch_std_wall},
             {"epoch_mean_simulated", s.epoch_mean_simulated},
             {"epoch_std_simulated", s.epoch_std_simulated},
             {"ratio_wall", s.ratio_wall},
             {"ratio_simulated", s.ratio_simulated},
             {"posterior_bytes", s.posterior_bytes},
             {"posterior_gib",
              std::round(s.posterior_bytes / 1073741824.0 * 1000.0) /
                  1000.0}});
    }
    std::ofstream out(path);
    if (!out) throw StorageError("emit: cannot open '" + path + "'");
    out << arr.dump(2) << '\n';
}

std::vector<TimingRecord> load_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("load: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != kRecordsCsvHeader)
        throw FormatError("load: bad CSV header in '" + path + "'");
    std::vector<TimingRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 10)
            throw FormatError("load: malformed CSV row in '" + path + "'");
        TimingRecord r;
        r.backend_label = fields[0];
        r.repetition = std::stoull(fields[1]);
        r.epoch = std::stoull(fields[2]);
        r.phase = phase_from_string(fields[3]);
        r.wall_seconds = std::stod(fields[4]);
        r.simulated_seconds = std::stod(fields[5]);
        r.bytes_read = std::stoull(fields[6]);
        r.bytes_written = std::stoull(fields[7]);
        r.cache_misses = std::stoull(fields[8]);
        r.evictions = std::stoull(fields[9]);
        records.push_back(std::move(r));
    }
    return records;
}

namespace {

store::BackendKind backend_kind_from_string(const std::string& s) {
    if (s == "inmemory") return store::BackendKind::InMemory;
    if (s == "mapped") return store::BackendKind::MappedFile;
    if (s == "simpmem") return store::BackendKind::SimulatedPMem;
    if (s == "tiered") return store::BackendKind::TieredCache;
    throw ConfigError("unknown backend kind '" + s + "'");
}

store::Layout layout_from_string(const std::string& s) {
    if (s == "rowmajor") return store::Layout::RowMajor;
    if (s == "colmajor") return store::Layout::ColMajor;
    throw ConfigError("unknown layout '" + s + "'");
}

store::BackendConfig backend_config_from_json(const nlohmann::json& j) {
    store::BackendConfig cfg;
    cfg.kind = backend_kind_from_string(j.value("kind", "inmemory"));
    cfg.accounting = j.value("accounting", cfg.accounting);
    cfg.latency.lambda = j.value("lambda", cfg.latency.lambda);
    cfg.latency.reference_bandwidth =
        j.value("reference_bandwidth", cfg.latency.reference_bandwidth);
    cfg.latency.per_transfer_latency =
        j.value("per_transfer_latency", cfg.latency.per_transfer_latency);
    cfg.alloc_penalty = j.value("alloc_penalty", cfg.alloc_penalty);
    cfg.directory = j.value("directory", cfg.directory);
    cfg.flush_each_write = j.value("flush_each_write", cfg.flush_each_write);
    cfg.cache_capacity_bytes =
        j.value("cache_capacity_bytes", cfg.cache_capacity_bytes);
    cfg.block_size_bytes = j.value("block_size_bytes", cfg.block_size_bytes);
    if (j.contains("backing"))
        cfg.backing = std::make_shared<store::BackendConfig>(
            backend_config_from_json(j.at("backing")));
    return cfg;
}

}  // namespace

ExperimentSpec parse_experiment_spec_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded())
        throw FormatError("config: malformed JSON");
    ExperimentSpec spec;
    try {
        if (j.contains("backend"))
            spec.backend = backend_config_from_json(j.at("backend"));
        if (j.contains("train")) {
            const auto& t = j.at("train");
            spec.train.minibatch_size =
                t.value("minibatch_size", spec.train.minibatch_size);
            spec.train.minibatches_per_epoch = t.value(
                "minibatches_per_epoch", spec.train.minibatches_per_epoch);
            spec.train.epochs = t.value("epochs", spec.train.epochs);
            spec.train.learning_rate =
                t.value("learning_rate", spec.train.learning_rate);
            spec.train.rng_seed = t.value("rng_seed", spec.train.rng_seed);
        }
        if (j.contains("swag")) {
            const auto& s = j.at("swag");
            spec.swag.burn_in = s.value("burn_in", spec.swag.burn_in);
            spec.swag.max_columns =
                s.value("max_columns", spec.swag.max_columns);
            spec.swag.scale = s.value("scale", spec.swag.scale);
            spec.swag.variance_floor =
                s.value("variance_floor", spec.swag.variance_floor);
            spec.swag.element_width =
                s.value("element_width", spec.swag.element_width);
        }
        spec.repetitions = j.value("repetitions", spec.repetitions);
        if (j.contains("coalescer")) {
            const auto& c = j.at("coalescer");
            store::CoalescerConfig cc;
            cc.capacity_columns =
                c.value("coalesce_columns", cc.capacity_columns);
            const std::string policy = c.value("flush_policy", "when_full");
            if (policy == "when_full")
                cc.flush_policy = store::FlushPolicy::WhenFull;
            else if (policy == "explicit")
                cc.flush_policy = store::FlushPolicy::Explicit;
            else
                throw ConfigError("config: unknown flush_policy '" + policy +
                                  "'");
            spec.coalescer = cc;
        }
        if (j.contains("layout"))
            spec.layout = layout_from_string(j.at("layout").get<std::string>());
        spec.output_dir = j.value("output_dir", spec.output_dir);
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            spec.dataset.synthetic_n =
                d.value("synthetic_n", spec.dataset.synthetic_n);
            spec.dataset.synthetic_seed =
                d.value("synthetic_seed", spec.dataset.synthetic_seed);
            spec.dataset.mnist_images =
                d.value("mnist_images", spec.dataset.mnist_images);
            spec.dataset.mnist_labels =
                d.value("mnist_labels", spec.dataset.mnist_labels);
        }
        if (j.contains("layer_sizes")) {
            const auto& ls = j.at("layer_sizes");
            if (ls.is_string()) {
                const std::string name = ls.get<std::string>();
                if (name == "desk")
                    spec.layer_sizes = train::MlpModel::desk_scale_sizes();
                else if (name == "paper-size")
                    spec.layer_sizes = train::MlpModel::paper_scale_sizes();
                else
                    throw ConfigError("config: unknown layer preset '" + name +
                                      "'");
            } else {
                spec.layer_sizes = ls.get<std::vector<std::size_t>>();
            }
        }
        spec.sample_draws = j.value("sample_draws", spec.sample_draws);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    return spec;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_experiment_spec_json(buf.str());
}

store::BackendConfig parse_backend_spec(const std::string& text) {
    std::stringstream ss(text);
    std::string token;
    store::BackendConfig cfg;
    bool first = true;
    while (std::getline(ss, token, ',')) {
        if (first) {
            cfg.kind = backend_kind_from_string(token);
            first = false;
            continue;
        }
        const auto eq = token.find('=');
        const std::string key = token.substr(0, eq);
        const std::string val =
            eq == std::string::npos ? "" : token.substr(eq + 1);
        if (key == "acct")
            cfg.accounting = true;
        else if (key == "lambda")
            cfg.latency.lambda = std::stod(val);
        else if (key == "bandwidth")
            cfg.latency.reference_bandwidth = std::stod(val);
        else if (key == "latency")
            cfg.latency.per_transfer_latency = std::stod(val);
        else if (key == "alloc")
            cfg.alloc_penalty = std::stod(val);
        else if (key == "dir")
            cfg.directory = val;
        else if (key == "flush_each_write")
            cfg.flush_each_write = val != "0" && val != "false";
        else if (key == "capacity")
            cfg.cache_capacity_bytes = std::stoull(val);
        else if (key == "block")
            cfg.block_size_bytes = std::stoull(val);
        else if (key == "backing")
            cfg.backing = std::make_shared<store::BackendConfig>(
                store::BackendConfig{
                    .kind = backend_kind_from_string(val)});
        else
            throw ConfigError("backend spec: unknown key '" + key + "'");
    }
    if (first) throw ConfigError("backend spec: empty");
    return cfg;
}

}  // namespace swagbench::bench
