#include "tcqa/params.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "tcqa/errors.hpp"

namespace tcqa {

namespace {

constexpr char kMagic[8] = {'T', 'C', 'Q', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(std::begin(bytes), std::end(bytes));
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::filesystem::path& path) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
        throw IoError("truncated checkpoint " + path.string());
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(std::begin(bytes), std::end(bytes));
    }
    T v;
    std::memcpy(&v, bytes, sizeof(T));
    return v;
}

}  // namespace

InitScheme InitScheme::uniform_for_dim(std::size_t d) {
    if (d == 0) throw ConfigError("uniform initialisation needs a positive dimension");
    return uniform(1.0 / std::sqrt(static_cast<double>(d)));
}

ParameterStore::ParameterStore(std::uint64_t seed) : seed_(seed), rng_(seed) {}

std::size_t ParameterStore::add(const ParamSpec& spec) {
    if (index_.contains(spec.name)) {
        throw ConfigError("duplicate parameter name '" + spec.name + "'");
    }
    Tensor value(spec.rows, spec.cols);
    if (spec.init.kind == InitScheme::Kind::uniform) {
        const double b = spec.init.bound;
        // open interval: never return the lower endpoint
        std::uniform_real_distribution<double> dist(std::nextafter(-b, 0.0), b);
        for (double& v : value.data()) v = dist(rng_);
    }
    params_.push_back({spec.name, std::move(value), Tensor(spec.rows, spec.cols)});
    index_.emplace(spec.name, params_.size() - 1);
    return params_.size() - 1;
}

bool ParameterStore::contains(std::string_view name) const {
    return index_.contains(std::string(name));
}

std::size_t ParameterStore::index(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) {
        throw LookupError("no parameter named '" + std::string(name) + "'");
    }
    return it->second;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) {
        std::fill(p.grad.data().begin(), p.grad.data().end(), 0.0);
    }
}

std::size_t ParameterStore::num_scalars() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

bool ParameterStore::operator==(const ParameterStore& other) const {
    if (params_.size() != other.params_.size()) return false;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name != other.params_[i].name) return false;
        if (!(params_[i].value == other.params_[i].value)) return false;
    }
    return true;
}

void ParameterStore::save(const std::filesystem::path& path, const nlohmann::json& metadata) const {
    nlohmann::json manifest;
    manifest["seed"] = seed_;
    manifest["params"] = nlohmann::json::array();
    for (const auto& p : params_) {
        manifest["params"].push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
    }
    manifest["metadata"] = metadata.is_null() ? nlohmann::json::object() : metadata;
    const std::string text = manifest.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_le<std::uint32_t>(out, kFormatVersion);
    write_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : params_) {
        for (double v : p.value.data()) write_le<double>(out, v);
    }
    if (!out) throw IoError("write failed for " + path.string());
}

ParameterStore ParameterStore::load(const std::filesystem::path& path, nlohmann::json* metadata) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[sizeof(kMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IoError(path.string() + " is not a parameter checkpoint");
    }
    auto version = read_le<std::uint32_t>(in, path);
    if (version != kFormatVersion) {
        throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    }
    auto len = read_le<std::uint64_t>(in, path);
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
        throw IoError("truncated checkpoint manifest in " + path.string());
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": bad manifest: " + e.what());
    }
    ParameterStore store(manifest.at("seed").get<std::uint64_t>());
    for (const auto& p : manifest.at("params")) {
        ParamSpec spec{p.at("name").get<std::string>(), p.at("rows").get<std::size_t>(),
                       p.at("cols").get<std::size_t>(), InitScheme::zeros()};
        auto i = store.add(spec);
        for (double& v : store.value(i).data()) v = read_le<double>(in, path);
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw IoError(path.string() + ": trailing bytes after tensor data");
    }
    if (metadata) *metadata = manifest.at("metadata");
    return store;
}

ParameterStore init_parameters(const std::vector<ParamSpec>& specs, std::uint64_t seed) {
    ParameterStore store(seed);
    for (const auto& s : specs) store.add(s);
    return store;
}

std::string file_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

}  // namespace tcqa
