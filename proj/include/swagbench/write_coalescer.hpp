#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "swagbench/tensor_store.hpp"

namespace swagbench::store {

enum class FlushPolicy : std::uint8_t { WhenFull, Explicit };

struct CoalescerConfig {
    std::size_t capacity_columns = 32;
    FlushPolicy flush_policy = FlushPolicy::WhenFull;
};

/// Buffers column writes in fast memory and flushes them to the backing
/// array as merged sequential region writes. Buffered data is volatile until
/// flushed; reads always see the newest version.
class WriteCoalescer final : public ColumnIo {
public:
    WriteCoalescer(std::shared_ptr<StorageBackend> backend, ArrayHandle handle,
                   CoalescerConfig config);

    const ArrayHandle& handle() const override { return handle_; }

    void write_column(std::size_t col,
                      std::span<const std::byte> data) override;
    std::vector<std::byte> read_column(std::size_t col) override;

    /// Drains the buffer: sorted buffered columns are grouped into maximal
    /// contiguous runs, each written as one region write. No-op when empty.
    void flush_now();

    /// flush_now plus a backing-array flush.
    void flush() override;

    std::size_t buffered_columns() const;

private:
    void flush_locked();

    std::shared_ptr<StorageBackend> backend_;
    ArrayHandle handle_;
    CoalescerConfig config_;
    std::map<std::size_t, std::vector<std::byte>> pending_;
    mutable std::mutex mutex_;
};

}  // namespace swagbench::store
