#include "swagbench/swag.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

#include "swagbench/kernels.hpp"

namespace swagbench::swag {

namespace {

constexpr char kMagic[4] = {'S', 'W', 'A', 'G'};
constexpr std::uint16_t kVersion = 1;

std::vector<std::byte> narrow_column(std::span<const double> column,
                                     std::size_t width) {
    std::vector<std::byte> bytes(column.size() * width);
    if (width == 8) {
        std::memcpy(bytes.data(), column.data(), bytes.size());
    } else {
        for (std::size_t i = 0; i < column.size(); ++i) {
            const float f = static_cast<float>(column[i]);
            std::memcpy(bytes.data() + i * 4, &f, 4);
        }
    }
    return bytes;
}

std::vector<double> widen_column(std::span<const std::byte> bytes,
                                 std::size_t width) {
    std::vector<double> column(bytes.size() / width);
    if (width == 8) {
        std::memcpy(column.data(), bytes.data(), bytes.size());
    } else {
        for (std::size_t i = 0; i < column.size(); ++i) {
            float f;
            std::memcpy(&f, bytes.data() + i * 4, 4);
            column[i] = f;
        }
    }
    return column;
}

// Streams bytes while maintaining a running CRC32 of everything seen.
class CrcWriter {
public:
    explicit CrcWriter(std::ostream& out) : out_(out) {}

    void write(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data),
                   static_cast<std::streamsize>(n));
        crc_ = ::crc32(crc_, static_cast<const Bytef*>(data),
                       static_cast<uInt>(n));
    }
    std::uint32_t crc() const { return static_cast<std::uint32_t>(crc_); }

private:
    std::ostream& out_;
    uLong crc_ = ::crc32(0L, nullptr, 0);
};

class CrcReader {
public:
    explicit CrcReader(std::istream& in) : in_(in) {}

    void read(void* data, std::size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw CorruptionError("checkpoint: truncated stream");
        crc_ = ::crc32(crc_, static_cast<const Bytef*>(data),
                       static_cast<uInt>(n));
    }
    std::uint32_t crc() const { return static_cast<std::uint32_t>(crc_); }

private:
    std::istream& in_;
    uLong crc_ = ::crc32(0L, nullptr, 0);
};

}  // namespace

void SwagConfig::validate(std::size_t dim) const {
    if (max_columns == 0) throw ConfigError("swag: max_columns must be >= 1");
    (void)dim;  // the deviation matrix may be wider than it is tall
    if (scale <= 0.0) throw ConfigError("swag: scale must be positive");
    if (variance_floor < 0.0)
        throw ConfigError("swag: variance floor must be nonnegative");
    if (element_width != 4 && element_width != 8)
        throw ConfigError("swag: element width must be 4 or 8");
}

SwagState::SwagState(std::size_t dim, SwagConfig config)
    : dim_(dim), config_(config) {
    if (dim == 0) throw ConfigError("swag: zero-dimensional parameter space");
    config_.validate(dim);
    moments_.mean.assign(dim, 0.0);
    moments_.sq_mean.assign(dim, 0.0);
}

SwagState::SwagState(std::size_t dim, SwagConfig config,
                     std::shared_ptr<store::StorageBackend> backend,
                     std::string array_name,
                     std::optional<store::CoalescerConfig> coalesce,
                     store::Layout layout)
    : SwagState(dim, config) {
    attach_array(std::move(backend), std::move(array_name), coalesce, layout);
}

SwagState SwagState::in_memory(std::size_t dim, SwagConfig config) {
    return SwagState(dim, config, store::make_backend({}), "swag_deviations");
}

void SwagState::attach_array(std::shared_ptr<store::StorageBackend> backend,
                             std::string array_name,
                             std::optional<store::CoalescerConfig> coalesce,
                             store::Layout layout) {
    store::ArrayHandle handle = backend->create_array(
        array_name, dim_, config_.max_columns, config_.element_width, layout);
    if (coalesce)
        io_ = std::make_unique<store::WriteCoalescer>(std::move(backend),
                                                      handle, *coalesce);
    else
        io_ = std::make_unique<store::DirectColumnIo>(std::move(backend),
                                                      handle);
}

SwagState SwagState::from_parts(
    SwagConfig config, MomentAccumulator moments,
    const std::vector<std::vector<double>>& deviation_columns,
    std::shared_ptr<store::StorageBackend> backend, std::string array_name) {
    const std::size_t dim = moments.mean.size();
    SwagState state(dim, config);
    if (moments.sq_mean.size() != dim)
        throw DimensionError("swag: moment vector lengths differ");
    const std::size_t expected =
        std::min(moments.count, config.max_columns);
    if (deviation_columns.size() != expected)
        throw DimensionError("swag: wrong deviation column count");
    state.moments_ = std::move(moments);
    state.total_seen_ = config.burn_in + state.moments_.count;
    state.attach_array(std::move(backend), std::move(array_name), {});
    for (std::size_t j = 0; j < deviation_columns.size(); ++j) {
        if (deviation_columns[j].size() != dim)
            throw DimensionError("swag: deviation column length mismatch");
        state.write_slot(state.slot_of(j), deviation_columns[j]);
    }
    return state;
}

std::size_t SwagState::rank() const {
    return std::min(moments_.count, config_.max_columns);
}

std::size_t SwagState::slot_of(std::size_t logical) const {
    return (moments_.count - rank() + logical) % config_.max_columns;
}

void SwagState::write_slot(std::size_t slot, std::span<const double> column) {
    io_->write_column(slot, narrow_column(column, config_.element_width));
}

void SwagState::update(const ParamVector& theta) {
    if (theta.size() != dim_)
        throw DimensionError("swag: iterate length mismatch");
    for (double v : theta)
        if (!std::isfinite(v))
            throw DataError("swag: non-finite entry in iterate");
    ++total_seen_;
    if (total_seen_ <= config_.burn_in) return;
    const std::size_t t = moments_.count + 1;
    kernels::par::moment_update(moments_.mean, moments_.sq_mean, theta,
                                1.0 / static_cast<double>(t));
    std::vector<double> deviation(dim_);
    kernels::par::subtract(theta, moments_.mean, deviation);
    moments_.count = t;
    write_slot((t - 1) % config_.max_columns, deviation);
}

std::vector<double> SwagState::diag_variance() const {
    if (moments_.count == 0) throw DataError("swag: empty posterior");
    std::vector<double> variance(dim_);
    kernels::par::diag_variance(moments_.mean, moments_.sq_mean, variance,
                                config_.variance_floor);
    return variance;
}

ParamVector SwagState::sample(std::uint64_t rng_seed) const {
    if (moments_.count == 0) throw DataError("swag: empty posterior");
    const std::vector<double> variance = diag_variance();
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> normal;
    std::vector<double> z1(dim_);
    for (double& z : z1) z = normal(rng);
    ParamVector out(dim_);
    kernels::par::diag_sample(moments_.mean, variance, z1,
                              config_.scale / std::sqrt(2.0), out);
    const std::size_t k = rank();
    if (k >= 2) {
        const double coeff =
            config_.scale / std::sqrt(2.0 * static_cast<double>(k - 1));
        for (std::size_t j = 0; j < k; ++j) {
            const double zj = normal(rng);
            const std::vector<double> column = deviation_column(j);
            kernels::par::axpy(out, coeff * zj, column);
        }
    }
    return out;
}

std::vector<double> SwagState::deviation_column(std::size_t j) const {
    if (j >= rank()) throw DimensionError("swag: deviation column out of range");
    return widen_column(io_->read_column(slot_of(j)), config_.element_width);
}

void SwagState::flush() { io_->flush(); }

void SwagState::checkpoint(std::ostream& sink) const {
    CrcWriter writer(sink);
    writer.write(kMagic, 4);
    writer.write(&kVersion, 2);
    nlohmann::json header{{"P", dim_},
                          {"T", moments_.count},
                          {"total_seen", total_seen_},
                          {"K", rank()},
                          {"K_max", config_.max_columns},
                          {"B", config_.burn_in},
                          {"s", config_.scale},
                          {"epsilon", config_.variance_floor},
                          {"element_width", config_.element_width}};
    const std::string text = header.dump();
    const std::uint32_t len = static_cast<std::uint32_t>(text.size());
    writer.write(&len, 4);
    writer.write(text.data(), text.size());
    writer.write(moments_.mean.data(), dim_ * 8);
    writer.write(moments_.sq_mean.data(), dim_ * 8);
    for (std::size_t j = 0; j < rank(); ++j) {
        const auto bytes = io_->read_column(slot_of(j));
        writer.write(bytes.data(), bytes.size());
    }
    const std::uint32_t crc = writer.crc();
    sink.write(reinterpret_cast<const char*>(&crc), 4);
}

SwagState SwagState::restore(std::istream& source,
                             std::shared_ptr<store::StorageBackend> backend,
                             std::string array_name,
                             std::optional<store::CoalescerConfig> coalesce) {
    CrcReader reader(source);
    char magic[4];
    reader.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic");
    std::uint16_t version;
    reader.read(&version, 2);
    if (version != kVersion)
        throw FormatError("checkpoint: unsupported version");
    std::uint32_t len;
    reader.read(&len, 4);
    std::string text(len, '\0');
    reader.read(text.data(), len);
    nlohmann::json header = nlohmann::json::parse(text, nullptr, false);
    if (header.is_discarded())
        throw FormatError("checkpoint: malformed header JSON");
    SwagConfig config;
    std::size_t dim, count, total_seen, k;
    try {
        dim = header.at("P").get<std::size_t>();
        count = header.at("T").get<std::size_t>();
        total_seen = header.at("total_seen").get<std::size_t>();
        k = header.at("K").get<std::size_t>();
        config.max_columns = header.at("K_max").get<std::size_t>();
        config.burn_in = header.at("B").get<std::size_t>();
        config.scale = header.at("s").get<double>();
        config.variance_floor = header.at("epsilon").get<double>();
        config.element_width = header.at("element_width").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: header field error: ") +
                          e.what());
    }
    if (k != std::min(count, config.max_columns))
        throw FormatError("checkpoint: inconsistent rank in header");
    SwagState state(dim, config);
    state.moments_.count = count;
    state.total_seen_ = total_seen;
    reader.read(state.moments_.mean.data(), dim * 8);
    reader.read(state.moments_.sq_mean.data(), dim * 8);
    std::vector<std::vector<std::byte>> columns(k);
    for (std::size_t j = 0; j < k; ++j) {
        columns[j].resize(dim * config.element_width);
        reader.read(columns[j].data(), columns[j].size());
    }
    const std::uint32_t computed = reader.crc();
    std::uint32_t stored;
    source.read(reinterpret_cast<char*>(&stored), 4);
    if (source.gcount() != 4)
        throw CorruptionError("checkpoint: truncated stream");
    if (stored != computed)
        throw CorruptionError("checkpoint: CRC mismatch");
    state.attach_array(std::move(backend), std::move(array_name), coalesce);
    for (std::size_t j = 0; j < k; ++j)
        state.io_->write_column(state.slot_of(j), columns[j]);
    return state;
}

std::uint64_t estimate_size(std::uint64_t params, std::uint64_t rank,
                            std::uint64_t element_width) {
    if (params == 0 || rank == 0 || element_width == 0)
        throw ConfigError("estimate_size: all inputs must be >= 1");
    const unsigned __int128 total = static_cast<unsigned __int128>(params) *
                                    rank * element_width;
    if (total > static_cast<unsigned __int128>(
                    std::numeric_limits<std::int64_t>::max()))
        throw RangeError("estimate_size: byte count exceeds 2^63-1");
    return static_cast<std::uint64_t>(total);
}

std::uint64_t rank_after_epochs(std::uint64_t epochs,
                                std::uint64_t minibatches_per_epoch,
                                std::uint64_t burn_in) {
    const unsigned __int128 total =
        static_cast<unsigned __int128>(epochs) * minibatches_per_epoch;
    if (total > std::numeric_limits<std::uint64_t>::max())
        throw RangeError("rank_after_epochs: overflow");
    const std::uint64_t seen = static_cast<std::uint64_t>(total);
    return seen > burn_in ? seen - burn_in : 0;
}

}  // namespace swagbench::swag
