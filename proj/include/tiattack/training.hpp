#pragma once

#include <cstdint>
#include <vector>

#include "tiattack/dataset.hpp"
#include "tiattack/models.hpp"

namespace tia {

struct TrainConfig {
    int epochs = 10;
    double learning_rate = 0.1;
    int batch_size = 32;
    std::uint64_t seed = 1;
    /// Random translation of each training image by up to this many pixels (0 disables).
    int shift_augment = 0;
};

struct TrainResult {
    TinyCnn model;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;  ///< 0 when no test set is given
    std::vector<double> epoch_loss;
};

/// Plain minibatch SGD on mean cross-entropy. The seed fixes the
/// initialization, the shuffling and the augmentation shifts. Throws
/// DivergedError when a batch loss is not finite.
TrainResult train_tiny_cnn(const LabeledDataset& train, const TrainConfig& config,
                           const LabeledDataset* test = nullptr);

/// Fraction of items whose argmax prediction equals the label.
double accuracy(const Classifier& model, const LabeledDataset& data, int batch_size = 256);

}  // namespace tia
