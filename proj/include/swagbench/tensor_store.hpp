#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "swagbench/errors.hpp"

namespace swagbench::store {

enum class Layout : std::uint8_t { RowMajor = 0, ColMajor = 1 };

enum class BackendKind : std::uint8_t {
    InMemory,
    MappedFile,
    SimulatedPMem,
    TieredCache,
};

const char* to_string(BackendKind kind);
const char* to_string(Layout layout);

/// Per-backend counters. All counters are monotone; simulated_time stays 0
/// unless the backend runs a virtual clock.
struct BackendStats {
    std::uint64_t bytes_read = 0;
    std::uint64_t bytes_written = 0;
    std::uint64_t read_ops = 0;
    std::uint64_t write_ops = 0;
    // Contiguous memory segments touched; a RowMajor column write counts one
    // per row, a ColMajor one counts a single transfer.
    std::uint64_t transfers = 0;
    std::uint64_t flushes = 0;
    std::uint64_t cache_hits = 0;
    std::uint64_t cache_misses = 0;
    std::uint64_t evictions = 0;
    double alloc_wall_time = 0.0;
    double simulated_time = 0.0;
};

/// Virtual-clock parameters: an operation touching B bytes in S segments
/// costs lambda * (B / reference_bandwidth + S * per_transfer_latency).
struct LatencyModel {
    double lambda = 3.0;
    double reference_bandwidth = 8.0e9;  // bytes per simulated second
    double per_transfer_latency = 100e-9;
};

struct BackendConfig {
    BackendKind kind = BackendKind::InMemory;

    // InMemory: when true, runs the virtual clock at lambda = 1 so simulated
    // backends have a DRAM accounting baseline to be compared against.
    bool accounting = false;

    // SimulatedPMem (lambda also used by InMemory accounting, forced to 1).
    LatencyModel latency;
    double alloc_penalty = 0.0;  // simulated seconds per create_array

    // MappedFile
    std::string directory = ".";
    bool flush_each_write = false;

    // TieredCache
    std::uint64_t cache_capacity_bytes = 1 << 20;
    std::uint64_t block_size_bytes = 4096;
    std::shared_ptr<BackendConfig> backing;  // defaults to SimulatedPMem
};

struct ArrayHandle {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t element_width = 0;
    Layout layout = Layout::ColMajor;
    std::uint32_t array_id = 0;

    std::size_t column_bytes() const { return rows * element_width; }
    std::size_t total_bytes() const { return rows * cols * element_width; }
};

/// A named 2-D array store. Region data is always exchanged in column-major
/// order within the region (row index fastest), independent of the array's
/// physical layout; the layout only decides which accesses are contiguous.
class StorageBackend {
public:
    virtual ~StorageBackend() = default;

    virtual ArrayHandle create_array(const std::string& name, std::size_t rows,
                                     std::size_t cols,
                                     std::size_t element_width,
                                     Layout layout) = 0;

    virtual void write_column(const ArrayHandle& h, std::size_t col,
                              std::span<const std::byte> data) = 0;
    virtual std::vector<std::byte> read_column(const ArrayHandle& h,
                                               std::size_t col) = 0;

    // Half-open ranges [row_begin, row_end) x [col_begin, col_end).
    virtual void write_region(const ArrayHandle& h, std::size_t row_begin,
                              std::size_t row_end, std::size_t col_begin,
                              std::size_t col_end,
                              std::span<const std::byte> data) = 0;
    virtual std::vector<std::byte> read_region(const ArrayHandle& h,
                                               std::size_t row_begin,
                                               std::size_t row_end,
                                               std::size_t col_begin,
                                               std::size_t col_end) = 0;

    virtual void flush(const ArrayHandle& h) = 0;

    virtual BackendStats stats() const = 0;
    virtual void reset_stats() = 0;

    virtual BackendKind kind() const = 0;
};

std::shared_ptr<StorageBackend> make_backend(const BackendConfig& config);

/// Convenience view binding a handle to its backend for column I/O.
/// WriteCoalescer implements the same interface on top of this one.
class ColumnIo {
public:
    virtual ~ColumnIo() = default;
    virtual const ArrayHandle& handle() const = 0;
    virtual void write_column(std::size_t col,
                              std::span<const std::byte> data) = 0;
    virtual std::vector<std::byte> read_column(std::size_t col) = 0;
    virtual void flush() = 0;
};

class DirectColumnIo final : public ColumnIo {
public:
    DirectColumnIo(std::shared_ptr<StorageBackend> backend, ArrayHandle handle)
        : backend_(std::move(backend)), handle_(std::move(handle)) {}

    const ArrayHandle& handle() const override { return handle_; }
    void write_column(std::size_t col,
                      std::span<const std::byte> data) override {
        backend_->write_column(handle_, col, data);
    }
    std::vector<std::byte> read_column(std::size_t col) override {
        return backend_->read_column(handle_, col);
    }
    void flush() override { backend_->flush(handle_); }

    StorageBackend& backend() { return *backend_; }

private:
    std::shared_ptr<StorageBackend> backend_;
    ArrayHandle handle_;
};

}  // namespace swagbench::store
