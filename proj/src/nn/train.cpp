#include "fdia/nn/train.hpp"

#include <cmath>
#include <numeric>

#include "fdia/random.hpp"

namespace fdia::nn {

const char* to_string(Precision p) noexcept {
    return p == Precision::single ? "single" : "double";
}

Precision precision_from_string(const std::string& text) {
    if (text == "single" || text == "float") return Precision::single;
    if (text == "double") return Precision::double_precision;
    throw ConfigError("unknown precision '" + text + "'");
}

const char* to_string(StopReason r) noexcept {
    return r == StopReason::early ? "early" : "max_epochs";
}

void TrainConfig::validate() const {
    if (batch_size < 1) {
        throw ConfigError("batch size must be at least 1");
    }
    if (max_epochs < 1) {
        throw ConfigError("max epochs must be at least 1");
    }
    if (!(adam.lr > 0.0)) {
        throw ConfigError("learning rate must be positive");
    }
}

template <typename T>
RowMatrix<T> standardized_matrix(const std::vector<data::Sample>& samples,
                                 const data::Scaler& scaler) {
    const std::size_t width = scaler.n * data::channels;
    RowMatrix<T> m(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(width));
    std::vector<double> row(width);
    for (std::size_t s = 0; s < samples.size(); ++s) {
        if (samples[s].n != scaler.n) {
            throw DimensionError("sample bus count does not match the scaler");
        }
        scaler.standardize(samples[s].features.data(), row.data());
        for (std::size_t k = 0; k < width; ++k) {
            m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = static_cast<T>(row[k]);
        }
    }
    return m;
}

namespace {

constexpr std::size_t eval_chunk = 512;

std::vector<std::uint8_t> labels_of(const std::vector<data::Sample>& samples) {
    std::vector<std::uint8_t> labels(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) labels[i] = samples[i].label;
    return labels;
}

template <typename T>
std::vector<double> logits_of(const Model<T>& model, const RowMatrix<T>& inputs) {
    const auto rows = static_cast<std::size_t>(inputs.rows());
    const auto width = static_cast<std::size_t>(inputs.cols());
    std::vector<double> out;
    out.reserve(rows);
    for (std::size_t start = 0; start < rows; start += eval_chunk) {
        const std::size_t count = std::min(eval_chunk, rows - start);
        const auto logits = model.forward(
            std::span<const T>(inputs.data() + start * width, count * width), count);
        out.insert(out.end(), logits.begin(), logits.end());
    }
    return out;
}

}  // namespace

template <typename T>
double mean_loss(const Model<T>& model, const RowMatrix<T>& inputs,
                 const std::vector<std::uint8_t>& labels) {
    return bce_with_logits(logits_of(model, inputs), labels).value;
}

template <typename T>
TrainHistory train(Model<T>& model, const data::Dataset& dataset, const TrainConfig& config) {
    config.validate();
    if (dataset.train().empty() || dataset.validation().empty()) {
        throw ConfigError("training needs nonempty train and validation splits");
    }
    if (dataset.n != model.arch().nodes) {
        throw DimensionError("dataset has " + std::to_string(dataset.n) +
                             " buses but the model expects " + std::to_string(model.arch().nodes));
    }
    const RowMatrix<T> train_x = standardized_matrix<T>(dataset.train(), dataset.scaler);
    const RowMatrix<T> val_x = standardized_matrix<T>(dataset.validation(), dataset.scaler);
    const auto train_y = labels_of(dataset.train());
    const auto val_y = labels_of(dataset.validation());
    const std::size_t width = model.input_width();
    const std::size_t count = dataset.train().size();

    TrainHistory history;
    history.initial_train_loss = mean_loss(model, train_x, train_y);
    history.initial_validation_loss = mean_loss(model, val_x, val_y);

    std::vector<T> best(model.parameters().begin(), model.parameters().end());
    history.best_validation_loss = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    AdamState<T> adam;
    ForwardCache<T> cache;
    std::vector<T> grads(model.parameters().size());
    std::vector<T> batch_x;
    std::vector<std::uint8_t> batch_y;
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, epoch));
        rng.shuffle(order.begin(), order.end());
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < count; start += config.batch_size) {
            const std::size_t b = std::min(config.batch_size, count - start);
            batch_x.resize(b * width);
            batch_y.resize(b);
            for (std::size_t r = 0; r < b; ++r) {
                const std::size_t idx = order[start + r];
                std::copy_n(train_x.data() + idx * width, width, batch_x.data() + r * width);
                batch_y[r] = train_y[idx];
            }
            const auto logits = model.forward(batch_x, b, &cache);
            const std::vector<double> z(logits.begin(), logits.end());
            const Loss loss = bce_with_logits(z, batch_y);
            if (!std::isfinite(loss.value)) {
                throw TrainingDiverged("training loss became non-finite in epoch " +
                                           std::to_string(epoch),
                                       history);
            }
            loss_sum += loss.value * static_cast<double>(b);
            const std::vector<T> dz(loss.gradient.begin(), loss.gradient.end());
            model.backward(cache, dz, grads);
            adam_step<T>(model.parameters(), grads, adam, config.adam);
        }
        const double val_loss = mean_loss(model, val_x, val_y);
        history.train_loss.push_back(loss_sum / static_cast<double>(count));
        history.validation_loss.push_back(val_loss);
        if (!std::isfinite(val_loss)) {
            throw TrainingDiverged("validation loss became non-finite in epoch " +
                                       std::to_string(epoch),
                                   history);
        }
        if (val_loss < history.best_validation_loss) {
            history.best_validation_loss = val_loss;
            history.best_epoch = epoch;
            std::copy(model.parameters().begin(), model.parameters().end(), best.begin());
            since_best = 0;
        } else {
            ++since_best;
        }
        if (config.early_stopping && since_best >= config.patience) {
            history.stop_reason = StopReason::early;
            break;
        }
    }
    model.set_parameters(best);
    return history;
}

template <typename T>
double predict(const Model<T>& model, const data::Scaler& scaler, const data::Sample& sample) {
    if (sample.n != model.arch().nodes || scaler.n != sample.n) {
        throw DimensionError("sample has " + std::to_string(sample.n) +
                             " buses but the model expects " + std::to_string(model.arch().nodes));
    }
    std::vector<double> row(model.input_width());
    scaler.standardize(sample.features.data(), row.data());
    const std::vector<T> x(row.begin(), row.end());
    return sigmoid(static_cast<double>(model.forward(x, 1).front()));
}

template <typename T>
std::vector<double> predict_batch(const Model<T>& model, const data::Scaler& scaler,
                                  const std::vector<data::Sample>& samples) {
    for (const auto& s : samples) {
        if (s.n != model.arch().nodes) {
            throw DimensionError("sample bus count does not match the model");
        }
    }
    auto logits = logits_of(model, standardized_matrix<T>(samples, scaler));
    for (auto& z : logits) z = sigmoid(z);
    return logits;
}

#define FDIA_INSTANTIATE(T)                                                                        \
    template RowMatrix<T> standardized_matrix<T>(const std::vector<data::Sample>&,                \
                                                 const data::Scaler&);                             \
    template double mean_loss<T>(const Model<T>&, const RowMatrix<T>&,                            \
                                 const std::vector<std::uint8_t>&);                                \
    template TrainHistory train<T>(Model<T>&, const data::Dataset&, const TrainConfig&);          \
    template double predict<T>(const Model<T>&, const data::Scaler&, const data::Sample&);        \
    template std::vector<double> predict_batch<T>(const Model<T>&, const data::Scaler&,           \
                                                  const std::vector<data::Sample>&);

FDIA_INSTANTIATE(float)
FDIA_INSTANTIATE(double)

#undef FDIA_INSTANTIATE

}  // namespace fdia::nn
