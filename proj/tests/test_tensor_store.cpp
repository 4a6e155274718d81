#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "swagbench/tensor_store.hpp"

using namespace swagbench;
using namespace swagbench::store;

namespace {

std::vector<std::byte> pattern(std::size_t n, unsigned seed) {
    std::vector<std::byte> v(n);
    std::mt19937 rng(seed);
    for (auto& b : v) b = std::byte(rng() & 0xff);
    return v;
}

BackendConfig tiered_config(std::uint64_t capacity, std::uint64_t block) {
    BackendConfig cfg;
    cfg.kind = BackendKind::TieredCache;
    cfg.cache_capacity_bytes = capacity;
    cfg.block_size_bytes = block;
    return cfg;
}

std::filesystem::path temp_dir(const char* tag) {
    auto dir = std::filesystem::temp_directory_path() /
               (std::string("swagbench_") + tag);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("create_array zero-initializes") {
    auto b = make_backend({});
    auto h = b->create_array("a", 3, 4, 8, Layout::ColMajor);
    const auto col = b->read_column(h, 0);
    CHECK(col.size() == 24);
    for (std::byte v : col) CHECK(v == std::byte{0});
}

TEST_CASE("create_array rejects bad requests") {
    auto b = make_backend({});
    b->create_array("a", 2, 2, 4, Layout::ColMajor);
    CHECK_THROWS_AS(b->create_array("a", 2, 2, 4, Layout::ColMajor),
                    StorageError);
    CHECK_THROWS_AS(b->create_array("z", 0, 2, 4, Layout::ColMajor),
                    ConfigError);
}

TEST_CASE("read-after-write on every backend") {
    const auto dir = temp_dir("raw");
    BackendConfig mapped;
    mapped.kind = BackendKind::MappedFile;
    mapped.directory = dir.string();
    BackendConfig simpmem;
    simpmem.kind = BackendKind::SimulatedPMem;
    for (const BackendConfig& cfg :
         {BackendConfig{}, mapped, simpmem, tiered_config(1 << 16, 4096)}) {
        auto b = make_backend(cfg);
        for (Layout layout : {Layout::ColMajor, Layout::RowMajor}) {
            auto h = b->create_array(std::string("arr_") + to_string(layout),
                                     7, 5, 4, layout);
            const auto data = pattern(h.column_bytes(), 42);
            b->write_column(h, 3, data);
            CHECK(b->read_column(h, 3) == data);
            // 1x1 region identity
            const auto cell = pattern(4, 7);
            b->write_region(h, 2, 3, 1, 2, cell);
            CHECK(b->read_region(h, 2, 3, 1, 2) == cell);
        }
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("column-write transfer accounting reflects layout") {
    auto b = make_backend({});
    auto row_major = b->create_array("r", 4, 4, 8, Layout::RowMajor);
    auto col_major = b->create_array("c", 4, 4, 8, Layout::ColMajor);
    const auto data = pattern(32, 1);
    b->reset_stats();
    b->write_column(col_major, 1, data);
    CHECK(b->stats().transfers == 1);
    b->write_column(row_major, 1, data);
    CHECK(b->stats().transfers == 5);  // 1 + rows
    CHECK(b->stats().bytes_written == 64);
    CHECK(b->stats().write_ops == 2);
}

TEST_CASE("full-array read equals concatenated column reads") {
    auto b = make_backend({});
    auto h = b->create_array("a", 6, 3, 4, Layout::ColMajor);
    for (std::size_t c = 0; c < 3; ++c)
        b->write_column(h, c, pattern(h.column_bytes(), unsigned(c)));
    std::vector<std::byte> concat;
    for (std::size_t c = 0; c < 3; ++c) {
        const auto col = b->read_column(h, c);
        concat.insert(concat.end(), col.begin(), col.end());
    }
    CHECK(b->read_region(h, 0, 6, 0, 3) == concat);
}

TEST_CASE("out-of-range and length errors") {
    auto b = make_backend({});
    auto h = b->create_array("a", 4, 2, 4, Layout::ColMajor);
    CHECK_THROWS_AS(b->write_column(h, 2, pattern(16, 0)), DimensionError);
    CHECK_THROWS_AS(b->write_column(h, 0, pattern(15, 0)), DimensionError);
    CHECK_THROWS_AS(b->read_region(h, 0, 5, 0, 1), DimensionError);
}

TEST_CASE("mapped-file contents survive into the on-disk file") {
    const auto dir = temp_dir("durability");
    BackendConfig cfg;
    cfg.kind = BackendKind::MappedFile;
    cfg.directory = dir.string();
    auto b = make_backend(cfg);
    auto h = b->create_array("persisted", 8, 2, 4, Layout::ColMajor);
    const auto data = pattern(h.column_bytes(), 9);
    b->write_column(h, 1, data);
    b->flush(h);
    // Independent reader: header then raw little-endian data.
    std::ifstream in(dir / "persisted.arr", std::ios::binary);
    REQUIRE(in);
    std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
    REQUIRE(raw.size() == 64 + 64);
    CHECK(std::memcmp(raw.data(), "TSTR", 4) == 0);
    CHECK(std::memcmp(raw.data() + 64 + 32, data.data(), 32) == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("flush_each_write makes flushes track writes") {
    const auto dir = temp_dir("few");
    BackendConfig cfg;
    cfg.kind = BackendKind::MappedFile;
    cfg.directory = dir.string();
    cfg.flush_each_write = true;
    auto b = make_backend(cfg);
    auto h = b->create_array("a", 4, 4, 4, Layout::ColMajor);
    for (std::size_t c = 0; c < 4; ++c)
        b->write_column(h, c, pattern(16, unsigned(c)));
    CHECK(b->stats().flushes == 4);
    std::filesystem::remove_all(dir);
}

TEST_CASE("in-memory flush only counts") {
    auto b = make_backend({});
    auto h = b->create_array("a", 2, 2, 4, Layout::ColMajor);
    const auto before = b->stats();
    b->flush(h);
    const auto after = b->stats();
    CHECK(after.flushes == before.flushes + 1);
    CHECK(after.simulated_time == 0.0);
}

TEST_CASE("simulated pmem pays the allocation penalty per array") {
    BackendConfig cfg;
    cfg.kind = BackendKind::SimulatedPMem;
    cfg.alloc_penalty = 0.5;
    auto b = make_backend(cfg);
    b->create_array("a", 2, 2, 4, Layout::ColMajor);
    b->create_array("b", 2, 2, 4, Layout::ColMajor);
    CHECK(b->stats().simulated_time >= 1.0);
}

TEST_CASE("lambda=1 simpmem matches the in-memory accounting baseline") {
    BackendConfig pm;
    pm.kind = BackendKind::SimulatedPMem;
    pm.latency.lambda = 1.0;
    pm.alloc_penalty = 0.0;
    BackendConfig mem;
    mem.accounting = true;
    mem.latency = pm.latency;
    auto a = make_backend(pm);
    auto b = make_backend(mem);
    for (auto& backend : {a, b}) {
        auto h = backend->create_array("a", 16, 8, 4, Layout::ColMajor);
        for (std::size_t c = 0; c < 8; ++c)
            backend->write_column(h, c, pattern(64, unsigned(c)));
        backend->read_region(h, 0, 16, 0, 8);
    }
    CHECK(a->stats().simulated_time ==
          doctest::Approx(b->stats().simulated_time).epsilon(1e-12));
    CHECK(a->stats().simulated_time > 0.0);
}

TEST_CASE("fresh backend has all-zero counters") {
    auto b = make_backend({});
    const auto s = b->stats();
    CHECK(s.bytes_read == 0);
    CHECK(s.bytes_written == 0);
    CHECK(s.flushes == 0);
    CHECK(s.cache_misses == 0);
    CHECK(s.simulated_time == 0.0);
}

TEST_CASE("LRU: cyclic writes over capacity+1 blocks never hit") {
    // 2-block cache, array spanning 3 blocks, column = exactly one block.
    auto b = make_backend(tiered_config(2 * 256, 256));
    auto h = b->create_array("a", 64, 3, 4, Layout::ColMajor);
    const auto data = pattern(256, 3);
    for (std::size_t pass = 0; pass < 2; ++pass)
        for (std::size_t c = 0; c < 3; ++c) b->write_column(h, c, data);
    b->reset_stats();
    for (std::size_t pass = 0; pass < 4; ++pass)
        for (std::size_t c = 0; c < 3; ++c) b->write_column(h, c, data);
    const auto s = b->stats();
    CHECK(s.cache_hits == 0);
    CHECK(s.cache_misses == 12);
    CHECK(s.evictions == 12);
}

TEST_CASE("LRU: working set within capacity reaches steady-state zero miss") {
    auto b = make_backend(tiered_config(4 * 256, 256));
    auto h = b->create_array("a", 64, 3, 4, Layout::ColMajor);
    const auto data = pattern(256, 3);
    for (std::size_t c = 0; c < 3; ++c) b->write_column(h, c, data);  // warm
    b->reset_stats();
    for (std::size_t pass = 0; pass < 4; ++pass)
        for (std::size_t c = 0; c < 3; ++c) b->write_column(h, c, data);
    CHECK(b->stats().cache_misses == 0);
    CHECK(b->stats().evictions == 0);
}

TEST_CASE("tiered region read spanning an evicted block counts a miss") {
    auto b = make_backend(tiered_config(2 * 256, 256));
    auto h = b->create_array("a", 64, 3, 4, Layout::ColMajor);
    b->write_column(h, 0, pattern(256, 1));
    b->write_column(h, 1, pattern(256, 2));
    b->write_column(h, 2, pattern(256, 3));  // evicts block 0
    b->reset_stats();
    b->read_column(h, 0);
    CHECK(b->stats().cache_misses == 1);
}

TEST_CASE("backend equivalence on a random operation trace") {
    const auto dir = temp_dir("equiv");
    BackendConfig mapped;
    mapped.kind = BackendKind::MappedFile;
    mapped.directory = dir.string();
    BackendConfig simpmem;
    simpmem.kind = BackendKind::SimulatedPMem;
    std::vector<std::shared_ptr<StorageBackend>> backends{
        make_backend({}), make_backend(mapped), make_backend(simpmem),
        make_backend(tiered_config(1 << 12, 512))};
    std::vector<ArrayHandle> handles;
    for (auto& b : backends)
        handles.push_back(b->create_array("a", 17, 9, 4, Layout::ColMajor));
    std::mt19937 rng(99);
    for (int op = 0; op < 300; ++op) {
        const std::size_t c = rng() % 9;
        if (rng() % 2) {
            const auto data = pattern(17 * 4, rng());
            for (std::size_t i = 0; i < backends.size(); ++i)
                backends[i]->write_column(handles[i], c, data);
        } else {
            const auto expect = backends[0]->read_column(handles[0], c);
            for (std::size_t i = 1; i < backends.size(); ++i)
                CHECK(backends[i]->read_column(handles[i], c) == expect);
        }
    }
    const auto expect = backends[0]->read_region(handles[0], 0, 17, 0, 9);
    for (std::size_t i = 1; i < backends.size(); ++i)
        CHECK(backends[i]->read_region(handles[i], 0, 17, 0, 9) == expect);
    std::filesystem::remove_all(dir);
}

TEST_CASE("simulated clock is deterministic and monotone") {
    BackendConfig cfg;
    cfg.kind = BackendKind::SimulatedPMem;
    auto run = [&] {
        auto b = make_backend(cfg);
        auto h = b->create_array("a", 32, 4, 8, Layout::ColMajor);
        std::vector<double> clock;
        for (std::size_t c = 0; c < 4; ++c) {
            b->write_column(h, c, pattern(256, unsigned(c)));
            clock.push_back(b->stats().simulated_time);
        }
        return clock;
    };
    const auto a = run(), b = run();
    CHECK(a == b);
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i] > a[i - 1]);
}

TEST_CASE("tiered capacity below one block is rejected") {
    CHECK_THROWS_AS(make_backend(tiered_config(100, 4096)), ConfigError);
}
