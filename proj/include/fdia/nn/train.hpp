#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fdia/dataset.hpp"
#include "fdia/error.hpp"
#include "fdia/nn/model.hpp"

namespace fdia::nn {

enum class Precision { single, double_precision };

const char* to_string(Precision p) noexcept;
Precision precision_from_string(const std::string& text);

struct TrainConfig {
    std::size_t batch_size = 256;
    std::size_t max_epochs = 256;
    std::size_t patience = 16;
    bool early_stopping = true;
    AdamHyper adam;
    std::uint64_t seed = 1;
    Precision precision = Precision::single;

    void validate() const;
};

enum class StopReason { early, max_epochs };

const char* to_string(StopReason r) noexcept;

struct TrainHistory {
    double initial_train_loss = 0.0;
    double initial_validation_loss = 0.0;
    std::vector<double> train_loss;       // mean mini-batch loss per epoch
    std::vector<double> validation_loss;  // full validation BCE per epoch
    std::size_t best_epoch = 0;           // 1-based
    double best_validation_loss = 0.0;
    StopReason stop_reason = StopReason::max_epochs;

    std::size_t epochs() const noexcept { return train_loss.size(); }
};

class TrainingDiverged : public Error {
  public:
    TrainingDiverged(const std::string& message, TrainHistory history)
        : Error(message), history_(std::move(history)) {}

    const TrainHistory& history() const noexcept { return history_; }

  private:
    TrainHistory history_;
};

// Standardized features of a split, one row per sample.
template <typename T>
RowMatrix<T> standardized_matrix(const std::vector<data::Sample>& samples, const data::Scaler& scaler);

// Mean BCE of the model on pre-standardized rows.
template <typename T>
double mean_loss(const Model<T>& model, const RowMatrix<T>& inputs,
                 const std::vector<std::uint8_t>& labels);

// Mini-batch Adam with early stopping on validation BCE. The model is left
// holding the parameters of the best validation epoch.
template <typename T>
TrainHistory train(Model<T>& model, const data::Dataset& dataset, const TrainConfig& config);

template <typename T>
double predict(const Model<T>& model, const data::Scaler& scaler, const data::Sample& sample);

template <typename T>
std::vector<double> predict_batch(const Model<T>& model, const data::Scaler& scaler,
                                  const std::vector<data::Sample>& samples);

}  // namespace fdia::nn
