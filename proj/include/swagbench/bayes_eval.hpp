#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swagbench/swag.hpp"
#include "swagbench/trainer.hpp"

namespace swagbench::eval {

enum class PredictiveSource : std::uint8_t { PointEstimate, SwagBma };

struct PredictiveResult {
    std::size_t num_classes = 0;
    std::vector<double> probs;  // N x C, each row a distribution
    PredictiveSource source = PredictiveSource::PointEstimate;
    std::size_t samples = 1;  // posterior samples averaged (1 for point)

    std::size_t size() const { return probs.size() / num_classes; }
    std::span<const double> row(std::size_t i) const {
        return {probs.data() + i * num_classes, num_classes};
    }
};

struct EvalMetrics {
    double nll = 0.0;       // mean negative log-likelihood, nats
    double accuracy = 0.0;  // argmax accuracy, lowest-index tie-break
    double ece = 0.0;       // expected calibration error, 15 bins
};

/// Softmax forward pass at the model's current parameters.
PredictiveResult point_predict(const train::MlpModel& model,
                               std::span<const double> inputs, std::size_t n);

/// Monte-Carlo model averaging: mean softmax output over S posterior
/// samples. Sample s uses seed rng_seed + s, so runs are reproducible and
/// individual samples can be re-drawn.
PredictiveResult bma_predict(const train::MlpModel& model_template,
                             const swag::SwagState& state,
                             std::span<const double> inputs, std::size_t n,
                             std::size_t num_samples, std::uint64_t rng_seed);

EvalMetrics evaluate(const PredictiveResult& pred,
                     std::span<const std::uint32_t> labels);

/// JSON record {source, S, nll, accuracy, ece, seed}.
std::string metrics_record(const PredictiveResult& pred,
                           const EvalMetrics& metrics, std::uint64_t seed);

}  // namespace swagbench::eval
