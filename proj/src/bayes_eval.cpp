#include "swagbench/bayes_eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <nlohmann/json.hpp>

#include "swagbench/kernels.hpp"

namespace swagbench::eval {

PredictiveResult point_predict(const train::MlpModel& model,
                               std::span<const double> inputs,
                               std::size_t n) {
    PredictiveResult result;
    result.num_classes = model.output_dim();
    result.probs = model.predict(inputs, n);
    result.source = PredictiveSource::PointEstimate;
    result.samples = 1;
    return result;
}

PredictiveResult bma_predict(const train::MlpModel& model_template,
                             const swag::SwagState& state,
                             std::span<const double> inputs, std::size_t n,
                             std::size_t num_samples,
                             std::uint64_t rng_seed) {
    if (num_samples == 0) throw ConfigError("bma: need at least one sample");
    if (state.dim() != model_template.parameter_count())
        throw DimensionError("bma: posterior and model dimensions disagree");
    train::MlpModel model = model_template;
    PredictiveResult result;
    result.num_classes = model.output_dim();
    result.probs.assign(n * result.num_classes, 0.0);
    for (std::size_t s = 0; s < num_samples; ++s) {
        const swag::ParamVector theta = state.sample(rng_seed + s);
        model.unflatten(theta);
        const std::vector<double> probs = model.predict(inputs, n);
        kernels::par::axpy(result.probs, 1.0 / num_samples, probs);
    }
    result.source = PredictiveSource::SwagBma;
    result.samples = num_samples;
    return result;
}

EvalMetrics evaluate(const PredictiveResult& pred,
                     std::span<const std::uint32_t> labels) {
    const std::size_t n = pred.size();
    const std::size_t c = pred.num_classes;
    if (labels.size() != n)
        throw DimensionError("evaluate: label count mismatch");
    constexpr std::size_t kBins = 15;
    std::array<double, kBins> bin_conf{}, bin_acc{};
    std::array<std::size_t, kBins> bin_n{};
    double nll = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= c) throw DataError("evaluate: label out of range");
        const auto row = pred.row(i);
        nll -= std::log(std::max(row[labels[i]], 1e-12));
        const auto arg = std::max_element(row.begin(), row.end());
        const std::size_t guess = static_cast<std::size_t>(arg - row.begin());
        const bool hit = guess == labels[i];
        correct += hit;
        const double conf = *arg;
        const std::size_t bin =
            std::min(static_cast<std::size_t>(conf * kBins), kBins - 1);
        bin_conf[bin] += conf;
        bin_acc[bin] += hit;
        bin_n[bin] += 1;
    }
    EvalMetrics m;
    m.nll = nll / static_cast<double>(n);
    m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    for (std::size_t b = 0; b < kBins; ++b)
        if (bin_n[b])
            m.ece += (static_cast<double>(bin_n[b]) / n) *
                     std::abs(bin_acc[b] / bin_n[b] - bin_conf[b] / bin_n[b]);
    return m;
}

std::string metrics_record(const PredictiveResult& pred,
                           const EvalMetrics& metrics, std::uint64_t seed) {
    nlohmann::json record{
        {"source", pred.source == PredictiveSource::PointEstimate
                       ? "point_estimate"
                       : "swag_bma"},
        {"S", pred.samples},
        {"nll", metrics.nll},
        {"accuracy", metrics.accuracy},
        {"ece", metrics.ece},
        {"seed", seed}};
    return record.dump();
}

}  // namespace swagbench::eval
