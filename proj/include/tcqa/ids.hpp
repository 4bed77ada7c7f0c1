#pragma once

#include <compare>
#include <cstdint>
#include <functional>

namespace tcqa {

/// Dense integer id tagged with its vocabulary so entity, relation and type
/// ids cannot be mixed up.
template <typename Tag>
struct StrongId {
    std::uint32_t value = 0;

    constexpr StrongId() = default;
    constexpr explicit StrongId(std::uint32_t v) : value(v) {}

    constexpr std::size_t index() const { return value; }
    constexpr auto operator<=>(const StrongId&) const = default;
};

struct EntityTag {};
struct RelationTag {};
struct TypeTag {};

using EntityId = StrongId<EntityTag>;
using RelationId = StrongId<RelationTag>;
using TypeId = StrongId<TypeTag>;

/// Type id 0 is reserved in every type vocabulary. It stands in for an
/// untyped entity and for a relation whose head or tail types have an empty
/// intersection.
inline constexpr TypeId kUnknownType{0};
inline constexpr const char* kUnknownTypeName = "<UNKNOWN>";

}  // namespace tcqa

template <typename Tag>
struct std::hash<tcqa::StrongId<Tag>> {
    std::size_t operator()(const tcqa::StrongId<Tag>& id) const noexcept {
        return std::hash<std::uint32_t>{}(id.value);
    }
};
