#include "lst/train.hpp"

#include "lst/attacks.hpp"
#include "lst/csv.hpp"
#include "lst/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace lst {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
    if (adversarial) {
        if (!(adversarial->radius > 0.0)) throw ConfigError("adversarial radius must be > 0");
        if (adversarial->steps < 1) throw ConfigError("adversarial steps must be >= 1");
    }
}

std::vector<EpochLog> train_in_place(Model& model, const TrainConfig& config, const Dataset& data) {
    config.validate();
    if (data.empty()) throw ConfigError("training data is empty");
    for (const Sample& s : data) {
        if (s.label < 0 || s.label >= model.num_classes()) {
            throw IndexError("training label " + std::to_string(s.label) + " out of range");
        }
        require_input_shape(model, s.input);
    }

    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<Tensor>& params = model.parameters();
    std::vector<Vector> velocity;
    for (const Tensor& p : params) velocity.push_back(Vector::Zero(p.numel()));

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<EpochLog> log;
    std::uint64_t attack_counter = 0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0, hits = 0;

        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<Vector> grads;
            for (const Tensor& p : params) grads.push_back(Vector::Zero(p.numel()));
            double batch_loss = 0.0;

            for (std::size_t k = start; k < stop; ++k) {
                const Sample& s = data[order[k]];
                Tensor input = s.input;
                if (config.adversarial) {
                    AttackConfig ac = AttackConfig::pgd_defaults(config.adversarial->radius, config.seed + attack_counter++);
                    ac.steps = config.adversarial->steps;
                    if (config.adversarial->step_size > 0.0) ac.step_size = config.adversarial->step_size;
                    input = pgd(model, s.input, s.label, ac);
                }
                Tape tape;
                std::vector<Var> bound;
                for (const Tensor& p : params) bound.push_back(tape.leaf(p));
                Var logits = model.forward_with(tape, tape.constant(input), bound);
                Var loss;
                try {
                    loss = softmax_cross_entropy(logits, s.label);
                } catch (const NumericError&) {
                    throw TrainingError("training diverged (non-finite loss) in epoch " + std::to_string(epoch), epoch);
                }
                tape.backward(loss);

                const Vector& z = logits.value().data();
                Index arg = 0;
                for (Index j = 1; j < z.size(); ++j)
                    if (z[j] > z[arg]) arg = j;
                hits += arg == s.label ? 1 : 0;
                batch_loss += loss.value()[0];
                for (std::size_t i = 0; i < params.size(); ++i) grads[i] += bound[i].grad().data();
            }

            const double n = static_cast<double>(stop - start);
            batch_loss /= n;
            if (!std::isfinite(batch_loss)) {
                throw TrainingError("training diverged (non-finite loss) in epoch " + std::to_string(epoch), epoch);
            }
            for (std::size_t i = 0; i < params.size(); ++i) {
                velocity[i] = config.momentum * velocity[i] + grads[i] / n;
                params[i].data() -= config.learning_rate * velocity[i];
                if (!params[i].all_finite()) {
                    throw TrainingError("training diverged (non-finite parameters) in epoch " + std::to_string(epoch),
                                        epoch);
                }
            }
            loss_sum += batch_loss;
            ++batches;
        }
        log.push_back({epoch, loss_sum / static_cast<double>(batches),
                       static_cast<double>(hits) / static_cast<double>(data.size())});
    }
    return log;
}

TrainResult train(const Architecture& arch, const TrainConfig& config, const Dataset& data) {
    config.validate();
    Model model = Model::initialize(arch, config.seed);
    std::vector<EpochLog> log = train_in_place(model, config, data);
    const double acc = accuracy(model, data);
    return TrainResult{std::move(model), std::move(log), acc};
}

void write_training_log_csv(std::ostream& os, const std::vector<EpochLog>& log) {
    CsvWriter csv(os, {"epoch", "loss", "accuracy"});
    for (const EpochLog& e : log) csv.row(e.epoch, e.loss, e.accuracy);
}

}  // namespace lst
