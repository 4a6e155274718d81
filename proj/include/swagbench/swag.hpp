#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "swagbench/tensor_store.hpp"
#include "swagbench/write_coalescer.hpp"

namespace swagbench::swag {

using ParamVector = std::vector<double>;

struct SwagConfig {
    std::size_t burn_in = 0;       // iterates discarded before accumulation
    std::size_t max_columns = 1;   // cap on stored deviation columns
    double scale = 1.0;            // sampling scale factor
    double variance_floor = 1e-12;
    std::size_t element_width = 4;  // bytes per stored deviation element

    void validate(std::size_t dim) const;
};

struct MomentAccumulator {
    std::size_t count = 0;  // accepted iterates
    std::vector<double> mean;
    std::vector<double> sq_mean;
};

/// Streaming low-rank-plus-diagonal Gaussian posterior approximation.
/// Running moments live in 8-byte reals; the deviation matrix lives in a
/// pluggable storage backend at the configured element width, one column per
/// accepted iterate, overwriting the oldest column once max_columns is hit.
class SwagState {
public:
    SwagState(std::size_t dim, SwagConfig config,
              std::shared_ptr<store::StorageBackend> backend,
              std::string array_name,
              std::optional<store::CoalescerConfig> coalesce = {},
              store::Layout layout = store::Layout::ColMajor);

    static SwagState in_memory(std::size_t dim, SwagConfig config);

    /// Builds a state directly from moments and logical-order deviation
    /// columns (oldest first). total_seen is burn_in + count.
    static SwagState from_parts(
        SwagConfig config, MomentAccumulator moments,
        const std::vector<std::vector<double>>& deviation_columns,
        std::shared_ptr<store::StorageBackend> backend,
        std::string array_name);

    /// Folds one SGD iterate into the posterior. Iterates up to burn_in are
    /// counted but otherwise ignored.
    void update(const ParamVector& theta);

    /// Elementwise max(sq_mean - mean^2, variance_floor).
    std::vector<double> diag_variance() const;

    /// mean + (s/sqrt(2)) * sqrt(diag) .* z1
    ///      + (s/sqrt(2(K-1))) * D * z2, diagonal-only when K < 2.
    ParamVector sample(std::uint64_t rng_seed) const;

    void checkpoint(std::ostream& sink) const;
    static SwagState restore(std::istream& source,
                             std::shared_ptr<store::StorageBackend> backend,
                             std::string array_name,
                             std::optional<store::CoalescerConfig> coalesce = {});

    void flush();

    std::size_t dim() const { return dim_; }
    std::size_t count() const { return moments_.count; }
    std::size_t total_seen() const { return total_seen_; }
    /// Stored deviation columns, min(count, max_columns).
    std::size_t rank() const;
    const SwagConfig& config() const { return config_; }
    const MomentAccumulator& moments() const { return moments_; }
    const std::vector<double>& mean() const { return moments_.mean; }

    /// Column j in logical order (0 = oldest retained), widened to doubles.
    std::vector<double> deviation_column(std::size_t j) const;

private:
    SwagState(std::size_t dim, SwagConfig config);
    void attach_array(std::shared_ptr<store::StorageBackend> backend,
                      std::string array_name,
                      std::optional<store::CoalescerConfig> coalesce,
                      store::Layout layout = store::Layout::ColMajor);
    std::size_t slot_of(std::size_t logical) const;
    void write_slot(std::size_t slot, std::span<const double> column);

    std::size_t dim_;
    SwagConfig config_;
    MomentAccumulator moments_;
    std::size_t total_seen_ = 0;
    mutable std::unique_ptr<store::ColumnIo> io_;
};

/// Deviation-matrix footprint in bytes: P * rank * element_width.
std::uint64_t estimate_size(std::uint64_t params, std::uint64_t rank,
                            std::uint64_t element_width);

/// Approximation rank after a number of epochs with no column cap.
std::uint64_t rank_after_epochs(std::uint64_t epochs,
                                std::uint64_t minibatches_per_epoch = 600,
                                std::uint64_t burn_in = 0);

}  // namespace swagbench::swag
