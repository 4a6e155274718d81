#include "swagbench/tensor_store.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <filesystem>
#include <list>
#include <mutex>
#include <unordered_map>

namespace swagbench::store {

const char* to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::InMemory: return "inmemory";
        case BackendKind::MappedFile: return "mapped";
        case BackendKind::SimulatedPMem: return "simpmem";
        case BackendKind::TieredCache: return "tiered";
    }
    return "?";
}

const char* to_string(Layout layout) {
    return layout == Layout::RowMajor ? "rowmajor" : "colmajor";
}

namespace {

struct ArrayMeta {
    std::string name;
    std::size_t rows = 0, cols = 0, element_width = 0;
    Layout layout = Layout::ColMajor;
    std::size_t nbytes = 0;
};

double wall_seconds_since(
    std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

}  // namespace

/// Shared implementation: address translation, bounds checks, stats. The raw
/// layer underneath is a flat zero-initialized byte store per array.
class FlatBackend : public StorageBackend {
public:
    ArrayHandle create_array(const std::string& name, std::size_t rows,
                             std::size_t cols, std::size_t element_width,
                             Layout layout) override {
        std::lock_guard lock(mutex_);
        if (rows == 0 || cols == 0 || element_width == 0)
            throw ConfigError("create_array: zero dimension in '" + name + "'");
        if (ids_.count(name))
            throw StorageError("create_array: duplicate array name '" + name +
                               "'");
        ArrayMeta meta{name, rows, cols, element_width, layout,
                       rows * cols * element_width};
        const auto t0 = std::chrono::steady_clock::now();
        const std::uint32_t id = raw_allocate(meta);
        stats_.alloc_wall_time += wall_seconds_since(t0);
        on_allocate();
        ids_.emplace(name, id);
        if (id >= metas_.size()) metas_.resize(id + 1);
        metas_[id] = meta;
        return ArrayHandle{name, rows, cols, element_width, layout, id};
    }

    void write_column(const ArrayHandle& h, std::size_t col,
                      std::span<const std::byte> data) override {
        write_region(h, 0, h.rows, col, col + 1, data);
    }

    std::vector<std::byte> read_column(const ArrayHandle& h,
                                       std::size_t col) override {
        return read_region(h, 0, h.rows, col, col + 1);
    }

    void write_region(const ArrayHandle& h, std::size_t row_begin,
                      std::size_t row_end, std::size_t col_begin,
                      std::size_t col_end,
                      std::span<const std::byte> data) override {
        std::lock_guard lock(mutex_);
        const ArrayMeta& meta = check_region(h, row_begin, row_end, col_begin,
                                             col_end);
        const std::size_t nbytes =
            (row_end - row_begin) * (col_end - col_begin) * meta.element_width;
        if (data.size() != nbytes)
            throw DimensionError("write_region: data length mismatch for '" +
                                 h.name + "'");
        copy_region(h.array_id, meta, row_begin, row_end, col_begin, col_end,
                    const_cast<std::byte*>(data.data()), /*is_write=*/true);
        const std::uint64_t segs =
            region_transfers(meta, row_begin, row_end, col_begin, col_end);
        stats_.bytes_written += nbytes;
        stats_.write_ops += 1;
        stats_.transfers += segs;
        account(nbytes, segs);
        if (flush_each_write_) {
            raw_flush(h.array_id);
            stats_.flushes += 1;
        }
    }

    std::vector<std::byte> read_region(const ArrayHandle& h,
                                       std::size_t row_begin,
                                       std::size_t row_end,
                                       std::size_t col_begin,
                                       std::size_t col_end) override {
        std::lock_guard lock(mutex_);
        const ArrayMeta& meta = check_region(h, row_begin, row_end, col_begin,
                                             col_end);
        const std::size_t nbytes =
            (row_end - row_begin) * (col_end - col_begin) * meta.element_width;
        std::vector<std::byte> out(nbytes);
        copy_region(h.array_id, meta, row_begin, row_end, col_begin, col_end,
                    out.data(), /*is_write=*/false);
        const std::uint64_t segs =
            region_transfers(meta, row_begin, row_end, col_begin, col_end);
        stats_.bytes_read += nbytes;
        stats_.read_ops += 1;
        stats_.transfers += segs;
        account(nbytes, segs);
        return out;
    }

    void flush(const ArrayHandle& h) override {
        std::lock_guard lock(mutex_);
        require_handle(h);
        raw_flush(h.array_id);
        stats_.flushes += 1;
    }

    BackendStats stats() const override {
        std::lock_guard lock(mutex_);
        BackendStats s = stats_;
        s.simulated_time += external_simulated_time();
        return s;
    }

    void reset_stats() override {
        std::lock_guard lock(mutex_);
        const double sim = stats_.simulated_time;
        stats_ = BackendStats{};
        // The virtual clock is a clock, not a counter.
        stats_.simulated_time = sim;
        reset_external_stats();
    }

    // Flat byte access for tiering; offsets are relative to the array start.
    void backed_read(std::uint32_t id, std::size_t offset,
                     std::span<std::byte> out) {
        std::lock_guard lock(mutex_);
        raw_read(id, offset, out);
        stats_.bytes_read += out.size();
        stats_.read_ops += 1;
        stats_.transfers += 1;
        account(out.size(), 1);
    }

    void backed_write(std::uint32_t id, std::size_t offset,
                      std::span<const std::byte> data) {
        std::lock_guard lock(mutex_);
        raw_write(id, offset, data);
        stats_.bytes_written += data.size();
        stats_.write_ops += 1;
        stats_.transfers += 1;
        account(data.size(), 1);
    }

    std::size_t array_bytes(std::uint32_t id) const {
        std::lock_guard lock(mutex_);
        return metas_.at(id).nbytes;
    }

protected:
    virtual std::uint32_t raw_allocate(const ArrayMeta& meta) = 0;
    virtual void raw_write(std::uint32_t id, std::size_t offset,
                           std::span<const std::byte> data) = 0;
    virtual void raw_read(std::uint32_t id, std::size_t offset,
                          std::span<std::byte> out) = 0;
    virtual void raw_flush(std::uint32_t id) {}
    virtual void account(std::size_t /*bytes*/, std::uint64_t /*transfers*/) {}
    virtual void on_allocate() {}
    virtual double external_simulated_time() const { return 0.0; }
    virtual void reset_external_stats() {}

    void bump_simulated(double seconds) { stats_.simulated_time += seconds; }

    BackendStats stats_;
    bool flush_each_write_ = false;
    mutable std::recursive_mutex mutex_;

private:
    const ArrayMeta& require_handle(const ArrayHandle& h) const {
        if (h.array_id >= metas_.size() || metas_[h.array_id].name != h.name)
            throw StorageError("unknown array handle '" + h.name + "'");
        return metas_[h.array_id];
    }

    const ArrayMeta& check_region(const ArrayHandle& h, std::size_t r0,
                                  std::size_t r1, std::size_t c0,
                                  std::size_t c1) const {
        const ArrayMeta& meta = require_handle(h);
        if (r0 >= r1 || c0 >= c1 || r1 > meta.rows || c1 > meta.cols)
            throw DimensionError("region out of range for '" + h.name + "'");
        return meta;
    }

    static std::uint64_t region_transfers(const ArrayMeta& meta,
                                          std::size_t r0, std::size_t r1,
                                          std::size_t c0, std::size_t c1) {
        if (meta.layout == Layout::ColMajor)
            return (r0 == 0 && r1 == meta.rows) ? 1 : (c1 - c0);
        return (c0 == 0 && c1 == meta.cols) ? 1 : (r1 - r0);
    }

    // Region data is column-major within the region; `buf` is read for
    // writes and filled for reads.
    void copy_region(std::uint32_t id, const ArrayMeta& meta, std::size_t r0,
                     std::size_t r1, std::size_t c0, std::size_t c1,
                     std::byte* buf, bool is_write) {
        const std::size_t w = meta.element_width;
        const std::size_t height = r1 - r0;
        if (meta.layout == Layout::ColMajor) {
            // Physical order matches region data order: one pass per column.
            std::byte* p = buf;
            for (std::size_t c = c0; c < c1; ++c, p += height * w) {
                const std::size_t off = (c * meta.rows + r0) * w;
                if (is_write)
                    raw_write(id, off, {p, height * w});
                else
                    raw_read(id, off, {p, height * w});
            }
        } else {
            // Row-major: stage one physical row at a time.
            const std::size_t row_bytes = (c1 - c0) * w;
            std::vector<std::byte> row(row_bytes);
            for (std::size_t r = r0; r < r1; ++r) {
                const std::size_t off = (r * meta.cols + c0) * w;
                if (is_write) {
                    for (std::size_t c = c0; c < c1; ++c)
                        std::memcpy(row.data() + (c - c0) * w,
                                    buf + ((c - c0) * height + (r - r0)) * w,
                                    w);
                    raw_write(id, off, row);
                } else {
                    raw_read(id, off, row);
                    for (std::size_t c = c0; c < c1; ++c)
                        std::memcpy(buf + ((c - c0) * height + (r - r0)) * w,
                                    row.data() + (c - c0) * w, w);
                }
            }
        }
    }

    std::unordered_map<std::string, std::uint32_t> ids_;
    std::vector<ArrayMeta> metas_;
};

namespace {

class InMemoryBackend : public FlatBackend {
public:
    explicit InMemoryBackend(const BackendConfig& cfg)
        : accounting_(cfg.accounting), latency_(cfg.latency) {
        latency_.lambda = 1.0;
    }

    BackendKind kind() const override { return BackendKind::InMemory; }

protected:
    std::uint32_t raw_allocate(const ArrayMeta& meta) override {
        buffers_.emplace_back(meta.nbytes, std::byte{0});
        return static_cast<std::uint32_t>(buffers_.size() - 1);
    }
    void raw_write(std::uint32_t id, std::size_t offset,
                   std::span<const std::byte> data) override {
        std::memcpy(buffers_[id].data() + offset, data.data(), data.size());
    }
    void raw_read(std::uint32_t id, std::size_t offset,
                  std::span<std::byte> out) override {
        std::memcpy(out.data(), buffers_[id].data() + offset, out.size());
    }
    void account(std::size_t bytes, std::uint64_t transfers) override {
        if (accounting_)
            bump_simulated(latency_.lambda *
                           (static_cast<double>(bytes) /
                                latency_.reference_bandwidth +
                            static_cast<double>(transfers) *
                                latency_.per_transfer_latency));
    }

private:
    bool accounting_;
    LatencyModel latency_;
    std::vector<std::vector<std::byte>> buffers_;
};

/// Same storage as InMemory, plus a virtual clock scaled by lambda and a
/// simulated allocation penalty.
class SimulatedPMemBackend : public FlatBackend {
public:
    explicit SimulatedPMemBackend(const BackendConfig& cfg)
        : latency_(cfg.latency), alloc_penalty_(cfg.alloc_penalty) {
        if (latency_.lambda < 1.0)
            throw ConfigError("simpmem: lambda must be >= 1");
    }

    BackendKind kind() const override { return BackendKind::SimulatedPMem; }

protected:
    std::uint32_t raw_allocate(const ArrayMeta& meta) override {
        buffers_.emplace_back(meta.nbytes, std::byte{0});
        return static_cast<std::uint32_t>(buffers_.size() - 1);
    }
    void raw_write(std::uint32_t id, std::size_t offset,
                   std::span<const std::byte> data) override {
        std::memcpy(buffers_[id].data() + offset, data.data(), data.size());
    }
    void raw_read(std::uint32_t id, std::size_t offset,
                  std::span<std::byte> out) override {
        std::memcpy(out.data(), buffers_[id].data() + offset, out.size());
    }
    void raw_flush(std::uint32_t) override {
        bump_simulated(latency_.lambda * latency_.per_transfer_latency);
    }
    void account(std::size_t bytes, std::uint64_t transfers) override {
        bump_simulated(latency_.lambda *
                       (static_cast<double>(bytes) /
                            latency_.reference_bandwidth +
                        static_cast<double>(transfers) *
                            latency_.per_transfer_latency));
    }
    void on_allocate() override { bump_simulated(alloc_penalty_); }

private:
    LatencyModel latency_;
    double alloc_penalty_;
    std::vector<std::vector<std::byte>> buffers_;
};

class MappedFileBackend : public FlatBackend {
public:
    explicit MappedFileBackend(const BackendConfig& cfg)
        : directory_(cfg.directory) {
        flush_each_write_ = cfg.flush_each_write;
        std::error_code ec;
        std::filesystem::create_directories(directory_, ec);
        if (ec)
            throw StorageError("mapped: cannot create directory '" +
                               directory_ + "': " + ec.message());
    }

    ~MappedFileBackend() override {
        for (auto& m : mappings_) {
            if (m.addr) {
                ::msync(m.addr, m.size, MS_SYNC);
                ::munmap(m.addr, m.size);
            }
            if (m.fd >= 0) ::close(m.fd);
        }
    }

    BackendKind kind() const override { return BackendKind::MappedFile; }

    static constexpr std::size_t kHeaderBytes = 64;

protected:
    std::uint32_t raw_allocate(const ArrayMeta& meta) override {
        const std::string path = directory_ + "/" + meta.name + ".arr";
        const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
        if (fd < 0)
            throw StorageError("mapped: open('" + path +
                               "') failed: " + std::strerror(errno));
        const std::size_t total = kHeaderBytes + meta.nbytes;
        if (::ftruncate(fd, static_cast<off_t>(total)) != 0) {
            const int err = errno;
            ::close(fd);
            throw StorageError("mapped: ftruncate('" + path +
                               "') failed: " + std::strerror(err));
        }
        void* addr =
            ::mmap(nullptr, total, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
        if (addr == MAP_FAILED) {
            const int err = errno;
            ::close(fd);
            throw StorageError("mapped: mmap('" + path +
                               "') failed: " + std::strerror(err));
        }
        write_header(static_cast<std::byte*>(addr), meta);
        mappings_.push_back({fd, addr, total});
        return static_cast<std::uint32_t>(mappings_.size() - 1);
    }
    void raw_write(std::uint32_t id, std::size_t offset,
                   std::span<const std::byte> data) override {
        std::memcpy(data_ptr(id) + offset, data.data(), data.size());
    }
    void raw_read(std::uint32_t id, std::size_t offset,
                  std::span<std::byte> out) override {
        std::memcpy(out.data(), data_ptr(id) + offset, out.size());
    }
    void raw_flush(std::uint32_t id) override {
        const Mapping& m = mappings_[id];
        if (::msync(m.addr, m.size, MS_SYNC) != 0)
            throw StorageError(std::string("mapped: msync failed: ") +
                               std::strerror(errno));
    }

private:
    struct Mapping {
        int fd = -1;
        void* addr = nullptr;
        std::size_t size = 0;
    };

    static void write_header(std::byte* p, const ArrayMeta& meta) {
        std::memset(p, 0, kHeaderBytes);
        std::memcpy(p, "TSTR", 4);
        const std::uint32_t version = 1;
        const std::uint64_t rows = meta.rows, cols = meta.cols;
        const std::uint32_t width = static_cast<std::uint32_t>(
            meta.element_width);
        const std::uint32_t layout = static_cast<std::uint32_t>(meta.layout);
        std::memcpy(p + 4, &version, 4);
        std::memcpy(p + 8, &rows, 8);
        std::memcpy(p + 16, &cols, 8);
        std::memcpy(p + 24, &width, 4);
        std::memcpy(p + 28, &layout, 4);
    }

    std::byte* data_ptr(std::uint32_t id) {
        return static_cast<std::byte*>(mappings_[id].addr) + kHeaderBytes;
    }

    std::string directory_;
    std::vector<Mapping> mappings_;
};

/// Front cache of fixed-size blocks over a backing store, strict LRU with
/// write-back. Models DRAM acting as a transparent cache for a slower tier.
class TieredCacheBackend : public FlatBackend {
public:
    explicit TieredCacheBackend(const BackendConfig& cfg)
        : block_size_(cfg.block_size_bytes), latency_(cfg.latency) {
        latency_.lambda = 1.0;  // front tier runs at DRAM speed
        if (block_size_ == 0)
            throw ConfigError("tiered: block size must be positive");
        capacity_blocks_ = cfg.cache_capacity_bytes / block_size_;
        if (capacity_blocks_ == 0)
            throw ConfigError("tiered: capacity below one block");
        BackendConfig backing_cfg;
        backing_cfg.kind = BackendKind::SimulatedPMem;
        if (cfg.backing) backing_cfg = *cfg.backing;
        auto backend = make_backend(backing_cfg);
        backing_ = std::dynamic_pointer_cast<FlatBackend>(backend);
        if (!backing_) throw ConfigError("tiered: unsupported backing store");
    }

    BackendKind kind() const override { return BackendKind::TieredCache; }

protected:
    std::uint32_t raw_allocate(const ArrayMeta& meta) override {
        const ArrayHandle h = backing_->create_array(
            meta.name, meta.rows, meta.cols, meta.element_width, meta.layout);
        if (h.array_id >= backing_handles_.size())
            backing_handles_.resize(h.array_id + 1);
        backing_handles_[h.array_id] = h;
        return h.array_id;
    }

    void raw_write(std::uint32_t id, std::size_t offset,
                   std::span<const std::byte> data) override {
        access(id, offset, const_cast<std::byte*>(data.data()), data.size(),
               /*is_write=*/true);
    }
    void raw_read(std::uint32_t id, std::size_t offset,
                  std::span<std::byte> out) override {
        access(id, offset, out.data(), out.size(), /*is_write=*/false);
    }
    void raw_flush(std::uint32_t id) override {
        for (auto& [key, block] : blocks_)
            if (key.first == id && block.dirty) {
                write_back(key, block);
            }
        // Backing flush cost, once per array flush.
        backing_->flush(backing_handles_[id]);
    }

    void account(std::size_t bytes, std::uint64_t transfers) override {
        bump_simulated(latency_.lambda *
                       (static_cast<double>(bytes) /
                            latency_.reference_bandwidth +
                        static_cast<double>(transfers) *
                            latency_.per_transfer_latency));
    }

    double external_simulated_time() const override {
        return backing_->stats().simulated_time;
    }
    void reset_external_stats() override { backing_->reset_stats(); }

private:
    using BlockKey = std::pair<std::uint32_t, std::size_t>;
    struct KeyHash {
        std::size_t operator()(const BlockKey& k) const {
            return std::hash<std::uint64_t>()(
                (static_cast<std::uint64_t>(k.first) << 40) ^ k.second);
        }
    };
    struct Block {
        std::vector<std::byte> data;
        bool dirty = false;
        std::list<BlockKey>::iterator lru_pos;
    };

    std::size_t block_span(std::uint32_t id, std::size_t block_index) const {
        const std::size_t total = backing_->array_bytes(id);
        const std::size_t begin = block_index * block_size_;
        return std::min(block_size_, total - begin);
    }

    Block& ensure_block(std::uint32_t id, std::size_t block_index) {
        const BlockKey key{id, block_index};
        auto it = blocks_.find(key);
        if (it != blocks_.end()) {
            stats_.cache_hits += 1;
            lru_.splice(lru_.begin(), lru_, it->second.lru_pos);
            return it->second;
        }
        stats_.cache_misses += 1;
        if (blocks_.size() >= capacity_blocks_) evict_lru();
        Block block;
        block.data.resize(block_span(id, block_index));
        backing_->backed_read(id, block_index * block_size_, block.data);
        lru_.push_front(key);
        auto [pos, inserted] = blocks_.emplace(key, std::move(block));
        pos->second.lru_pos = lru_.begin();
        return pos->second;
    }

    void evict_lru() {
        const BlockKey victim = lru_.back();
        auto it = blocks_.find(victim);
        if (it->second.dirty) write_back(victim, it->second);
        lru_.pop_back();
        blocks_.erase(it);
        stats_.evictions += 1;
    }

    void write_back(const BlockKey& key, Block& block) {
        backing_->backed_write(key.first, key.second * block_size_,
                               block.data);
        block.dirty = false;
    }

    void access(std::uint32_t id, std::size_t offset, std::byte* buf,
                std::size_t len, bool is_write) {
        std::size_t done = 0;
        while (done < len) {
            const std::size_t pos = offset + done;
            const std::size_t block_index = pos / block_size_;
            const std::size_t in_block = pos % block_size_;
            Block& block = ensure_block(id, block_index);
            const std::size_t chunk =
                std::min(len - done, block.data.size() - in_block);
            if (is_write) {
                std::memcpy(block.data.data() + in_block, buf + done, chunk);
                block.dirty = true;
            } else {
                std::memcpy(buf + done, block.data.data() + in_block, chunk);
            }
            done += chunk;
        }
    }

    std::size_t block_size_;
    std::size_t capacity_blocks_ = 0;
    LatencyModel latency_;
    std::shared_ptr<FlatBackend> backing_;
    std::vector<ArrayHandle> backing_handles_;
    std::unordered_map<BlockKey, Block, KeyHash> blocks_;
    std::list<BlockKey> lru_;
};

}  // namespace

std::shared_ptr<StorageBackend> make_backend(const BackendConfig& config) {
    switch (config.kind) {
        case BackendKind::InMemory:
            return std::make_shared<InMemoryBackend>(config);
        case BackendKind::SimulatedPMem:
            return std::make_shared<SimulatedPMemBackend>(config);
        case BackendKind::MappedFile:
            return std::make_shared<MappedFileBackend>(config);
        case BackendKind::TieredCache:
            return std::make_shared<TieredCacheBackend>(config);
    }
    throw ConfigError("unknown backend kind");
}

}  // namespace swagbench::store
