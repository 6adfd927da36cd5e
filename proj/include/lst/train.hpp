#pragma once

#include "lst/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace lst {

// Replaces every training sample with a PGD adversary of the current model.
struct AdversarialTraining {
    double radius = 0.1;
    int steps = 7;
    double step_size = 0.0;  // 0 selects radius / 4
};

struct TrainConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    int epochs = 50;
    int batch_size = 32;
    std::uint64_t seed = 0;
    std::optional<AdversarialTraining> adversarial;

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;      // mean minibatch loss over the epoch
    double accuracy = 0.0;  // fraction of samples classified correctly before each update
};

struct TrainResult {
    Model model;
    std::vector<EpochLog> log;
    double train_accuracy = 0.0;  // clean accuracy of the final model on the training set
};

// Minibatch SGD with momentum on mean cross-entropy. Deterministic for a
// fixed seed: the seed drives initialisation, shuffling and PGD starts.
TrainResult train(const Architecture& arch, const TrainConfig& config, const Dataset& data);

// Continues training an existing model in place.
std::vector<EpochLog> train_in_place(Model& model, const TrainConfig& config, const Dataset& data);

// CSV: epoch,loss,accuracy
void write_training_log_csv(std::ostream& os, const std::vector<EpochLog>& log);

}  // namespace lst
