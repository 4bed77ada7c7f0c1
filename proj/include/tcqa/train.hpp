#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "tcqa/model.hpp"
#include "tcqa/query.hpp"

namespace tcqa {

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 64;
    std::size_t steps = 1000;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    /// Loss CSV granularity.
    std::size_t log_every = 100;
    /// Where the offending batch goes when the loss turns non-finite.
    std::filesystem::path failure_dump = "train_failure.jsonl";

    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; unknown keys raise ConfigError.
    static TrainConfig from_json(const nlohmann::json& j);
};

/// Adam that only touches coordinates whose gradient is nonzero in the
/// current step. Moment estimates of untouched coordinates are left as they
/// are, so sparse embedding rows stay put between the steps that use them.
class LazyAdam {
public:
    LazyAdam(ParameterStore& store, double learning_rate, double beta1, double beta2, double eps);

    /// Applies the gradients currently held in the store.
    void step();
    std::size_t steps_taken() const { return t_; }

private:
    ParameterStore& store_;
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

struct TrainResult {
    /// Mean batch loss of every step, in order.
    std::vector<double> losses;
};

/// Minibatch training with margin loss and uniform negatives.
///
/// Each batch element picks a structure uniformly among those present in
/// `queries`, a query of that structure, and a positive among its answers.
/// Negatives are drawn with replacement from entities outside the answer set
/// (restricted to training entities for inductive models).
TrainResult train(Model& model, const QuerySet& queries, const TrainConfig& config);

/// `step,loss` rows every `log_every` steps plus the final step.
void write_loss_csv(const TrainResult& result, std::size_t log_every, const std::filesystem::path& path);

}  // namespace tcqa
