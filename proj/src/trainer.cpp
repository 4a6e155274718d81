#include "swagbench/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "swagbench/kernels.hpp"

namespace swagbench::train {

namespace {

std::uint32_t read_be_u32(const std::byte* p) {
    return (std::uint32_t(std::to_integer<unsigned>(p[0])) << 24) |
           (std::uint32_t(std::to_integer<unsigned>(p[1])) << 16) |
           (std::uint32_t(std::to_integer<unsigned>(p[2])) << 8) |
           std::uint32_t(std::to_integer<unsigned>(p[3]));
}

std::size_t idx_element_size(std::uint8_t type_code) {
    switch (type_code) {
        case 0x08: return 1;  // unsigned byte
        case 0x0C: return 4;  // 32-bit int
        default:
            throw FormatError("idx: unsupported type code " +
                              std::to_string(type_code));
    }
}

void softmax_rows(std::vector<double>& logits, std::size_t n,
                  std::size_t c) {
    for (std::size_t i = 0; i < n; ++i) {
        double* row = logits.data() + i * c;
        const double m = *std::max_element(row, row + c);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            row[j] = std::exp(row[j] - m);
            sum += row[j];
        }
        for (std::size_t j = 0; j < c; ++j) row[j] /= sum;
    }
}

}  // namespace

std::size_t IdxTensor::element_size() const {
    return idx_element_size(type_code);
}

std::size_t IdxTensor::element_count() const {
    std::size_t n = 1;
    for (std::uint32_t d : dims) n *= d;
    return n;
}

IdxTensor parse_idx(std::span<const std::byte> bytes) {
    if (bytes.size() < 4) throw FormatError("idx: stream shorter than magic");
    if (bytes[0] != std::byte{0} || bytes[1] != std::byte{0})
        throw FormatError("idx: bad magic (leading bytes nonzero)");
    IdxTensor tensor;
    tensor.type_code = std::to_integer<std::uint8_t>(bytes[2]);
    const std::size_t elem = idx_element_size(tensor.type_code);
    const std::size_t ndims = std::to_integer<std::uint8_t>(bytes[3]);
    if (ndims == 0) throw FormatError("idx: zero-dimensional tensor");
    if (bytes.size() < 4 + 4 * ndims)
        throw FormatError("idx: truncated dimension list");
    std::size_t total = 1;
    for (std::size_t i = 0; i < ndims; ++i) {
        const std::uint32_t d = read_be_u32(bytes.data() + 4 + 4 * i);
        tensor.dims.push_back(d);
        total *= d;
    }
    const std::size_t payload = total * elem;
    const std::size_t offset = 4 + 4 * ndims;
    if (bytes.size() - offset < payload)
        throw FormatError("idx: truncated payload (" +
                          std::to_string(bytes.size() - offset) + " of " +
                          std::to_string(payload) + " bytes)");
    if (bytes.size() - offset > payload)
        throw FormatError("idx: trailing bytes after payload");
    tensor.payload.assign(bytes.begin() + offset, bytes.end());
    return tensor;
}

IdxTensor parse_idx_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("idx: cannot open '" + path + "'");
    std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
    return parse_idx(std::as_bytes(std::span(raw)));
}

Dataset load_mnist(const std::string& images_path,
                   const std::string& labels_path) {
    const IdxTensor images = parse_idx_file(images_path);
    const IdxTensor labels = parse_idx_file(labels_path);
    if (images.type_code != 0x08 || images.dims.size() != 3)
        throw FormatError("mnist: images must be a 3-d byte tensor");
    if (labels.type_code != 0x08 || labels.dims.size() != 1)
        throw FormatError("mnist: labels must be a 1-d byte vector");
    if (images.dims[0] != labels.dims[0])
        throw DimensionError("mnist: image/label counts differ");
    Dataset data;
    const std::size_t n = images.dims[0];
    data.feature_dim = std::size_t(images.dims[1]) * images.dims[2];
    data.num_classes = 10;
    data.inputs.resize(n * data.feature_dim);
    for (std::size_t i = 0; i < data.inputs.size(); ++i)
        data.inputs[i] =
            std::to_integer<unsigned>(images.payload[i]) / 255.0;
    data.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        data.labels[i] = std::to_integer<unsigned>(labels.payload[i]);
        if (data.labels[i] >= data.num_classes)
            throw DataError("mnist: label out of range");
    }
    return data;
}

Dataset synthetic_dataset(std::uint64_t seed, std::size_t n, std::size_t d,
                          std::size_t c, double spread) {
    if (n == 0 || d == 0 || c == 0)
        throw ConfigError("synthetic_dataset: zero size");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> center(0.2, 0.8);
    std::normal_distribution<double> noise(0.0, spread);
    std::vector<double> centers(c * d);
    for (double& v : centers) v = center(rng);
    Dataset data;
    data.feature_dim = d;
    data.num_classes = c;
    data.inputs.resize(n * d);
    data.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % c;
        data.labels[i] = static_cast<std::uint32_t>(label);
        for (std::size_t j = 0; j < d; ++j)
            data.inputs[i * d + j] = std::clamp(
                centers[label * d + j] + noise(rng), 0.0, 1.0);
    }
    return data;
}

void TrainConfig::validate() const {
    if (minibatch_size == 0 || minibatches_per_epoch == 0 || epochs == 0)
        throw ConfigError("train: counts must be positive");
    if (learning_rate < 0.0)
        throw ConfigError("train: learning rate must be nonnegative");
}

MlpModel::MlpModel(std::vector<std::size_t> layer_sizes,
                   std::uint64_t init_seed)
    : layer_sizes_(std::move(layer_sizes)) {
    if (layer_sizes_.size() < 2)
        throw ConfigError("mlp: need at least input and output layers");
    for (std::size_t s : layer_sizes_)
        if (s == 0) throw ConfigError("mlp: zero-width layer");
    std::mt19937_64 rng(init_seed);
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
        Layer layer;
        layer.fan_in = layer_sizes_[l];
        layer.fan_out = layer_sizes_[l + 1];
        // Kaiming-uniform over fan_in.
        const double limit = std::sqrt(6.0 / layer.fan_in);
        std::uniform_real_distribution<double> init(-limit, limit);
        layer.weights.resize(layer.fan_out * layer.fan_in);
        for (double& w : layer.weights) w = init(rng);
        layer.biases.assign(layer.fan_out, 0.0);
        layers_.push_back(std::move(layer));
    }
}

std::vector<std::size_t> MlpModel::desk_scale_sizes() {
    return {784, 32, 32, 10};
}

std::vector<std::size_t> MlpModel::paper_scale_sizes() {
    // Four fully connected layers, 2,831,942 parameters (within 2% of 2.8M).
    return {784, 1200, 1100, 512, 10};
}

std::size_t MlpModel::parameter_count() const {
    std::size_t p = 0;
    for (const Layer& l : layers_) p += l.fan_out * l.fan_in + l.fan_out;
    return p;
}

std::vector<double> MlpModel::flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const Layer& l : layers_) {
        out.insert(out.end(), l.weights.begin(), l.weights.end());
        out.insert(out.end(), l.biases.begin(), l.biases.end());
    }
    return out;
}

void MlpModel::unflatten(std::span<const double> params) {
    if (params.size() != parameter_count())
        throw DimensionError("mlp: flattened parameter length mismatch");
    const double* p = params.data();
    for (Layer& l : layers_) {
        std::memcpy(l.weights.data(), p, l.weights.size() * 8);
        p += l.weights.size();
        std::memcpy(l.biases.data(), p, l.biases.size() * 8);
        p += l.biases.size();
    }
}

std::vector<double> MlpModel::forward(
    std::span<const double> inputs, std::size_t n,
    std::vector<std::vector<double>>* acts) const {
    if (inputs.size() != n * input_dim())
        throw DimensionError("mlp: input batch length mismatch");
    std::vector<double> a(inputs.begin(), inputs.end());
    if (acts) acts->push_back(a);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        std::vector<double> z(n * layer.fan_out);
        kernels::par::matmul_nt(a, layer.weights, z, n, layer.fan_out,
                                layer.fan_in);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < layer.fan_out; ++j)
                z[i * layer.fan_out + j] += layer.biases[j];
        if (l + 1 < layers_.size())
            for (double& v : z) v = std::max(v, 0.0);
        a = std::move(z);
        if (acts && l + 1 < layers_.size()) acts->push_back(a);
    }
    for (double v : a)
        if (!std::isfinite(v))
            throw DivergenceError("mlp: non-finite activation in forward pass");
    return a;  // logits
}

std::vector<double> MlpModel::predict(std::span<const double> inputs,
                                      std::size_t n) const {
    std::vector<double> logits = forward(inputs, n, nullptr);
    softmax_rows(logits, n, output_dim());
    return logits;
}

double MlpModel::loss_and_gradient(std::span<const double> inputs,
                                   std::span<const std::uint32_t> labels,
                                   std::size_t n,
                                   std::vector<double>& grad) const {
    if (labels.size() != n) throw DimensionError("mlp: label count mismatch");
    const std::size_t c = output_dim();
    std::vector<std::vector<double>> acts;  // pre-layer activations
    std::vector<double> probs = forward(inputs, n, &acts);
    softmax_rows(probs, n, c);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= c) throw DataError("mlp: label out of range");
        loss -= std::log(std::max(probs[i * c + labels[i]], 1e-300));
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss))
        throw DivergenceError("mlp: non-finite loss");

    grad.assign(parameter_count(), 0.0);
    // delta = (probs - onehot) / n at the softmax layer.
    std::vector<double> delta = std::move(probs);
    for (std::size_t i = 0; i < n; ++i) {
        delta[i * c + labels[i]] -= 1.0;
        for (std::size_t j = 0; j < c; ++j)
            delta[i * c + j] /= static_cast<double>(n);
    }
    // Flattened gradient offsets per layer.
    std::vector<std::size_t> offsets(layers_.size());
    std::size_t off = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        offsets[l] = off;
        off += layers_[l].weights.size() + layers_[l].biases.size();
    }
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& layer = layers_[l];
        const std::vector<double>& a_prev = acts[l];
        // dW[o][i] = sum_b delta[b][o] * a_prev[b][i]
        std::span<double> dw(grad.data() + offsets[l], layer.weights.size());
        kernels::par::matmul_tn(delta, a_prev, dw, layer.fan_out,
                                layer.fan_in, n);
        double* db = grad.data() + offsets[l] + layer.weights.size();
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < layer.fan_out; ++o)
                db[o] += delta[b * layer.fan_out + o];
        if (l == 0) break;
        // Propagate through weights, then the previous ReLU.
        std::vector<double> prev_delta(n * layer.fan_in);
        kernels::par::matmul_nn(delta, layer.weights, prev_delta, n,
                                layer.fan_in, layer.fan_out);
        for (std::size_t i = 0; i < prev_delta.size(); ++i)
            if (a_prev[i] <= 0.0) prev_delta[i] = 0.0;
        delta = std::move(prev_delta);
    }
    return loss;
}

std::vector<double> gradient(const MlpModel& model,
                             std::span<const double> inputs,
                             std::span<const std::uint32_t> labels,
                             std::size_t n) {
    if (n == 0) throw DimensionError("gradient: empty batch");
    std::vector<double> grad;
    model.loss_and_gradient(inputs, labels, n, grad);
    return grad;
}

double sgd_epoch(MlpModel& model, const Dataset& data,
                 const TrainConfig& config, std::mt19937_64& rng,
                 const IterateObserver& observer) {
    config.validate();
    if (data.feature_dim != model.input_dim() ||
        data.num_classes > model.output_dim())
        throw DimensionError("sgd: model and dataset dimensions disagree");
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    const std::size_t b = config.minibatch_size;
    std::vector<double> batch_inputs(b * data.feature_dim);
    std::vector<std::uint32_t> batch_labels(b);
    std::vector<double> grad;
    std::vector<double> params = model.flatten();
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < config.minibatches_per_epoch; ++step) {
        for (std::size_t i = 0; i < b; ++i) {
            const std::size_t idx = pick(rng);
            const auto row = data.input_row(idx);
            std::copy(row.begin(), row.end(),
                      batch_inputs.begin() + i * data.feature_dim);
            batch_labels[i] = data.labels[idx];
        }
        double loss;
        try {
            loss = model.loss_and_gradient(batch_inputs, batch_labels, b,
                                           grad);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " at minibatch " +
                                  std::to_string(step));
        }
        loss_sum += loss;
        kernels::par::axpy(params, -config.learning_rate, grad);
        model.unflatten(params);
        if (observer) observer(params);
    }
    return loss_sum / static_cast<double>(config.minibatches_per_epoch);
}

}  // namespace swagbench::train
