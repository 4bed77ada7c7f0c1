#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tcqa/tensor.hpp"

namespace tcqa {

struct InitScheme {
    enum class Kind : std::uint8_t { uniform, zeros };

    Kind kind = Kind::zeros;
    double bound = 0.0;

    /// Uniform on (-1/sqrt(d), 1/sqrt(d)).
    static InitScheme uniform_for_dim(std::size_t d);
    static InitScheme uniform(double bound) { return {Kind::uniform, bound}; }
    static InitScheme zeros() { return {Kind::zeros, 0.0}; }
};

struct ParamSpec {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    InitScheme init;
};

/// Named learnable tensors, each with a same-shaped gradient slot.
///
/// Parameters are initialised in registration order from one generator seeded
/// at construction, so a fixed seed and a fixed registration order give
/// bit-identical stores.
class ParameterStore {
public:
    explicit ParameterStore(std::uint64_t seed = 0);

    /// Throws ConfigError on a duplicate name.
    std::size_t add(const ParamSpec& spec);

    bool contains(std::string_view name) const;
    std::size_t index(std::string_view name) const;
    const std::string& name(std::size_t i) const { return params_.at(i).name; }
    std::size_t size() const { return params_.size(); }
    std::uint64_t seed() const { return seed_; }

    Tensor& value(std::size_t i) { return params_.at(i).value; }
    const Tensor& value(std::size_t i) const { return params_.at(i).value; }
    Tensor& value(std::string_view name) { return value(index(name)); }
    const Tensor& value(std::string_view name) const { return value(index(name)); }
    Tensor& grad(std::size_t i) { return params_.at(i).grad; }
    const Tensor& grad(std::size_t i) const { return params_.at(i).grad; }
    Tensor& grad(std::string_view name) { return grad(index(name)); }
    const Tensor& grad(std::string_view name) const { return grad(index(name)); }

    void zero_grad();
    std::size_t num_scalars() const;

    /// Binary checkpoint: magic, format version, JSON manifest (names, shapes,
    /// seed, caller metadata), then every tensor as little-endian f64 in
    /// manifest order.
    void save(const std::filesystem::path& path, const nlohmann::json& metadata = {}) const;
    static ParameterStore load(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

    bool operator==(const ParameterStore& other) const;

private:
    struct Param {
        std::string name;
        Tensor value;
        Tensor grad;
    };

    std::uint64_t seed_;
    std::mt19937_64 rng_;
    std::vector<Param> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

ParameterStore init_parameters(const std::vector<ParamSpec>& specs, std::uint64_t seed);

/// 64-bit FNV-1a over a file's bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

}  // namespace tcqa
