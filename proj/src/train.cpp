#include "tcqa/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "tcqa/errors.hpp"

namespace tcqa {

namespace {

struct BatchItem {
    const QueryRecord* record;
    EntityId positive;
    std::vector<EntityId> negatives;
};

void dump_batch(const std::vector<BatchItem>& batch, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) return;
    for (const auto& item : batch) {
        nlohmann::json j;
        const auto& q = item.record->query;
        j["structure"] = q.structure() ? std::string(to_string(*q.structure())) : "custom";
        for (auto a : q.anchors()) j["anchors"].push_back(a.value);
        for (auto r : q.relations()) j["relations"].push_back(r.value);
        j["positive"] = item.positive.value;
        for (auto n : item.negatives) j["negatives"].push_back(n.value);
        out << j.dump() << '\n';
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be finite and non-negative");
    }
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (log_every == 0) throw ConfigError("log_every must be at least 1");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"learning_rate", learning_rate}, {"batch_size", batch_size}, {"steps", steps},
            {"beta1", beta1}, {"beta2", beta2}, {"eps", eps}, {"seed", seed}, {"log_every", log_every}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "learning_rate") c.learning_rate = value.get<double>();
            else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
            else if (key == "steps") c.steps = value.get<std::size_t>();
            else if (key == "beta1") c.beta1 = value.get<double>();
            else if (key == "beta2") c.beta2 = value.get<double>();
            else if (key == "eps") c.eps = value.get<double>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "log_every") c.log_every = value.get<std::size_t>();
            else if (key == "failure_dump") c.failure_dump = value.get<std::string>();
            else throw ConfigError("unknown train config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad train config: ") + e.what());
    }
    c.validate();
    return c;
}

LazyAdam::LazyAdam(ParameterStore& store, double learning_rate, double beta1, double beta2, double eps)
    : store_(store), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& v = store.value(i);
        m_.emplace_back(v.rows(), v.cols());
        v_.emplace_back(v.rows(), v.cols());
    }
}

void LazyAdam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < store_.size(); ++i) {
        auto value = store_.value(i).data();
        auto grad = store_.grad(i).data();
        auto m = m_[i].data();
        auto v = v_[i].data();
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double g = grad[k];
            if (g == 0.0) continue;
            m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
            v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
            value[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
        }
    }
}

TrainResult train(Model& model, const QuerySet& queries, const TrainConfig& config) {
    config.validate();
    std::vector<std::vector<const QueryRecord*>> by_structure;
    for (auto s : kAllStructures) {
        auto records = queries.of(s);
        if (!records.empty()) by_structure.push_back(std::move(records));
    }
    if (by_structure.empty()) throw PreconditionError("training needs at least one query");
    for (const auto& group : by_structure) {
        for (const auto* r : group) {
            if (r->answers.empty()) throw PreconditionError("training query without answers");
        }
    }

    const std::vector<EntityId> pool = model.seen_entities();
    std::mt19937_64 rng(config.seed);
    LazyAdam adam(model.params(), config.learning_rate, config.beta1, config.beta2, config.eps);
    const std::size_t n_neg = model.config().negative_samples;

    TrainResult result;
    result.losses.reserve(config.steps);
    std::vector<EntityId> candidates;
    for (std::size_t step = 0; step < config.steps; ++step) {
        std::vector<BatchItem> batch;
        batch.reserve(config.batch_size);
        for (std::size_t b = 0; b < config.batch_size; ++b) {
            const auto& group = by_structure[std::uniform_int_distribution<std::size_t>(0, by_structure.size() - 1)(rng)];
            const QueryRecord* rec = group[std::uniform_int_distribution<std::size_t>(0, group.size() - 1)(rng)];
            EntityId pos = rec->answers[std::uniform_int_distribution<std::size_t>(0, rec->answers.size() - 1)(rng)];
            candidates.clear();
            for (EntityId e : pool) {
                if (!std::binary_search(rec->answers.begin(), rec->answers.end(), e)) candidates.push_back(e);
            }
            if (candidates.empty()) {
                throw PreconditionError("every candidate entity answers the query; no negatives to sample");
            }
            std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
            std::vector<EntityId> negs(n_neg);
            for (auto& n : negs) n = candidates[pick(rng)];
            batch.push_back({rec, pos, std::move(negs)});
        }

        Model::Forward fwd(model);
        std::vector<Var> losses;
        losses.reserve(batch.size());
        for (const auto& item : batch) {
            losses.push_back(fwd.loss(item.record->query, item.positive, item.negatives));
        }
        Var loss = scale(sum(concat_rows(losses)), 1.0 / static_cast<double>(batch.size()));
        const double value = loss.value()[0];
        if (!std::isfinite(value)) {
            dump_batch(batch, config.failure_dump);
            throw NumericError("non-finite loss (batch written to " + config.failure_dump.string() + ")", step);
        }
        fwd.tape().backward(loss);
        adam.step();
        result.losses.push_back(value);
    }
    return result;
}

void write_loss_csv(const TrainResult& result, std::size_t log_every, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "step,loss\n";
    out.precision(17);
    for (std::size_t i = 0; i < result.losses.size(); ++i) {
        if (i % log_every == 0 || i + 1 == result.losses.size()) out << i << ',' << result.losses[i] << '\n';
    }
}

}  // namespace tcqa
