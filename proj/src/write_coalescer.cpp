#include "swagbench/write_coalescer.hpp"

#include <cstring>

namespace swagbench::store {

WriteCoalescer::WriteCoalescer(std::shared_ptr<StorageBackend> backend,
                               ArrayHandle handle, CoalescerConfig config)
    : backend_(std::move(backend)),
      handle_(std::move(handle)),
      config_(config) {
    if (config_.capacity_columns == 0)
        throw ConfigError("coalescer: capacity must be >= 1 column");
}

void WriteCoalescer::write_column(std::size_t col,
                                  std::span<const std::byte> data) {
    std::lock_guard lock(mutex_);
    if (col >= handle_.cols)
        throw DimensionError("coalescer: column index out of range");
    if (data.size() != handle_.column_bytes())
        throw DimensionError("coalescer: column length mismatch");
    pending_[col].assign(data.begin(), data.end());
    if (config_.flush_policy == FlushPolicy::WhenFull &&
        pending_.size() >= config_.capacity_columns)
        flush_locked();
}

std::vector<std::byte> WriteCoalescer::read_column(std::size_t col) {
    std::lock_guard lock(mutex_);
    auto it = pending_.find(col);
    if (it != pending_.end()) return it->second;
    return backend_->read_column(handle_, col);
}

void WriteCoalescer::flush_now() {
    std::lock_guard lock(mutex_);
    flush_locked();
}

void WriteCoalescer::flush() {
    std::lock_guard lock(mutex_);
    flush_locked();
    backend_->flush(handle_);
}

std::size_t WriteCoalescer::buffered_columns() const {
    std::lock_guard lock(mutex_);
    return pending_.size();
}

void WriteCoalescer::flush_locked() {
    auto it = pending_.begin();
    while (it != pending_.end()) {
        // Maximal run of adjacent column indices (pending_ is sorted).
        auto run_end = it;
        std::size_t next = it->first;
        while (run_end != pending_.end() && run_end->first == next) {
            ++run_end;
            ++next;
        }
        const std::size_t col_begin = it->first;
        const std::size_t col_end = next;
        std::vector<std::byte> merged;
        merged.reserve((col_end - col_begin) * handle_.column_bytes());
        for (auto c = it; c != run_end; ++c)
            merged.insert(merged.end(), c->second.begin(), c->second.end());
        backend_->write_region(handle_, 0, handle_.rows, col_begin, col_end,
                               merged);
        it = run_end;
    }
    pending_.clear();
}

}  // namespace swagbench::store
