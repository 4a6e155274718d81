#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "swagbench/errors.hpp"

namespace swagbench::train {

/// Decoded IDX tensor; payload keeps the file's big-endian element bytes.
struct IdxTensor {
    std::uint8_t type_code = 0;
    std::vector<std::uint32_t> dims;
    std::vector<std::byte> payload;

    std::size_t element_size() const;
    std::size_t element_count() const;
};

IdxTensor parse_idx(std::span<const std::byte> bytes);
IdxTensor parse_idx_file(const std::string& path);

struct Dataset {
    std::size_t feature_dim = 0;
    std::size_t num_classes = 0;
    std::vector<double> inputs;  // N x d, row-major, entries in [0,1]
    std::vector<std::uint32_t> labels;

    std::size_t size() const { return labels.size(); }
    std::span<const double> input_row(std::size_t i) const {
        return {inputs.data() + i * feature_dim, feature_dim};
    }
};

Dataset load_mnist(const std::string& images_path,
                   const std::string& labels_path);

/// Gaussian class blobs, deterministic per seed, linearly separable at the
/// default spread.
Dataset synthetic_dataset(std::uint64_t seed, std::size_t n, std::size_t d,
                          std::size_t c, double spread = 0.05);

struct TrainConfig {
    std::size_t minibatch_size = 100;
    std::size_t minibatches_per_epoch = 600;
    std::size_t epochs = 1;
    double learning_rate = 0.05;
    std::uint64_t rng_seed = 1;

    void validate() const;
};

/// Fully connected ReLU network with a softmax head, trained by plain
/// minibatch SGD. Parameters flatten to a single vector (per layer: weight
/// rows then biases) and the round trip is exact.
class MlpModel {
public:
    MlpModel(std::vector<std::size_t> layer_sizes, std::uint64_t init_seed);

    static std::vector<std::size_t> desk_scale_sizes();   // 784-32-32-10
    static std::vector<std::size_t> paper_scale_sizes();  // ~2.8M parameters

    std::size_t parameter_count() const;
    std::size_t input_dim() const { return layer_sizes_.front(); }
    std::size_t output_dim() const { return layer_sizes_.back(); }
    const std::vector<std::size_t>& layer_sizes() const {
        return layer_sizes_;
    }

    std::vector<double> flatten() const;
    void unflatten(std::span<const double> params);

    /// Softmax class probabilities for a batch, n x C row-major.
    std::vector<double> predict(std::span<const double> inputs,
                                std::size_t n) const;

    /// Mean cross-entropy and its exact gradient in flattened layout.
    double loss_and_gradient(std::span<const double> inputs,
                             std::span<const std::uint32_t> labels,
                             std::size_t n, std::vector<double>& grad) const;

private:
    struct Layer {
        std::size_t fan_in = 0, fan_out = 0;
        std::vector<double> weights;  // fan_out x fan_in, row-major
        std::vector<double> biases;
    };

    std::vector<double> forward(std::span<const double> inputs, std::size_t n,
                                std::vector<std::vector<double>>* acts) const;

    std::vector<std::size_t> layer_sizes_;
    std::vector<Layer> layers_;
};

/// Exact gradient of mean cross-entropy over the given examples.
std::vector<double> gradient(const MlpModel& model,
                             std::span<const double> inputs,
                             std::span<const std::uint32_t> labels,
                             std::size_t n);

using IterateObserver = std::function<void(const std::vector<double>&)>;

/// One epoch of minibatch SGD; the observer receives the flattened
/// parameters after every minibatch. Returns the mean minibatch loss.
double sgd_epoch(MlpModel& model, const Dataset& data,
                 const TrainConfig& config, std::mt19937_64& rng,
                 const IterateObserver& observer);

}  // namespace swagbench::train
