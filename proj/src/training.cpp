#include "tiattack/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tiattack/errors.hpp"

namespace tia {

double accuracy(const Classifier& model, const LabeledDataset& data, int batch_size) {
    if (data.size() == 0) return 0.0;
    int correct = 0;
    for (int first = 0; first < data.size(); first += batch_size) {
        const int count = std::min(batch_size, data.size() - first);
        auto pred = predict(model, data.images.slice(first, count));
        for (int i = 0; i < count; ++i) correct += pred[i] == data.labels[first + i];
    }
    return static_cast<double>(correct) / data.size();
}

TrainResult train_tiny_cnn(const LabeledDataset& train, const TrainConfig& config, const LabeledDataset* test) {
    if (!(config.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
    if (config.batch_size < 1) throw std::invalid_argument("train: batch size must be positive");
    if (config.epochs < 0) throw std::invalid_argument("train: epochs must be non-negative");
    if (config.shift_augment < 0) throw std::invalid_argument("train: shift_augment must be non-negative");

    const Shape& s = train.images.shape();
    const InputShape input{s.c, s.h, s.w};
    Rng rng(config.seed);
    TrainResult result{TinyCnn::initialized(train.num_classes, input, rng), 0.0, 0.0, {}};
    TinyCnn& model = result.model;

    std::vector<int> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<int>(order));
        double loss_sum = 0.0;
        for (int first = 0; first < train.size(); first += config.batch_size) {
            const int count = std::min(config.batch_size, train.size() - first);
            Tensor batch(Shape{count, s.c, s.h, s.w});
            std::vector<int> labels(count);
            for (int i = 0; i < count; ++i) {
                const int src = order[first + i];
                Tensor img = train.images.image(src);
                if (config.shift_augment > 0) {
                    const int di = static_cast<int>(rng.uniform_int(-config.shift_augment, config.shift_augment));
                    const int dj = static_cast<int>(rng.uniform_int(-config.shift_augment, config.shift_augment));
                    img = shift(img, di, dj, ShiftMode::ZeroFill);
                }
                std::copy(img.values().begin(), img.values().end(), batch.image_values(i).begin());
                labels[i] = train.labels[src];
            }

            SoftmaxLoss sl = softmax_cross_entropy(model.logits(batch), labels);
            double batch_loss = 0.0;
            for (double l : sl.loss) batch_loss += l;
            if (!std::isfinite(batch_loss)) throw DivergedError(epoch + 1);
            loss_sum += batch_loss;

            // Mean loss over the batch.
            for (double& g : sl.dlogits.values) g /= count;
            TinyCnn::Params grads = model.backward_params(batch, sl.dlogits);
            auto params = model.params().all();
            auto grad_list = grads.all();
            for (std::size_t p = 0; p < params.size(); ++p) {
                auto dst = params[p]->values();
                auto g = grad_list[p]->values();
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= config.learning_rate * g[i];
            }
        }
        result.epoch_loss.push_back(loss_sum / train.size());
    }

    result.train_accuracy = accuracy(model, train);
    if (test) result.test_accuracy = accuracy(model, *test);
    return result;
}

}  // namespace tia
