#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "tcqa/tensor.hpp"

namespace tcqa {

class ParameterStore;
class Tape;

/// Handle to a value recorded on a Tape.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    Tape* tape() const { return tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Reverse-mode differentiation tape.
///
/// Every operation appends a node holding its value and a closure that pushes
/// the node's gradient to its inputs. Parameter leaves remember which slice of
/// which ParameterStore tensor they read, and `backward` accumulates into the
/// store's gradient slots.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    /// The whole parameter tensor.
    Var parameter(ParameterStore& store, std::string_view name);
    /// Row `row` of a parameter table, as a column vector.
    Var parameter_row(ParameterStore& store, std::string_view name, std::size_t row);

    /// Records an operation result. `backward` may be empty for constants.
    Var record(Tensor value, BackwardFn backward);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    /// Gradient accumulator of node `id`; allocated on first use.
    Tensor& grad(std::size_t id);

    /// Zeroes the gradient slots of every store this tape read from, then
    /// fills them with d(loss)/d(parameter). `loss` must be a 1×1 node of this tape.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Binding {
        ParameterStore* store = nullptr;
        std::size_t param = 0;
        std::size_t offset = 0;
    };
    struct Node {
        Tensor value;
        Tensor grad;
        BackwardFn backward;
        Binding binding;
    };

    Var leaf(ParameterStore& store, std::size_t param, std::size_t offset, std::size_t rows,
             std::size_t cols);

    // A deque keeps earlier values in place while later nodes are appended,
    // so references returned by Var::value() stay valid for the tape's life.
    std::deque<Node> nodes_;
    std::set<ParameterStore*> stores_;
    std::map<std::tuple<const ParameterStore*, std::size_t, std::size_t>, std::size_t> leaf_cache_;
};

// Operations. Shape mismatches raise DimensionError naming both shapes.

Var matmul(Var a, Var b);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
/// Elementwise product.
Var hadamard(Var a, Var b);
/// Adds a column vector to every column of `m`.
Var add_bias(Var m, Var bias);
/// 1 - x, elementwise.
Var one_minus(Var x);
Var scale(Var x, double factor);
Var sigmoid(Var x);
Var relu(Var x);
/// Stacks operands vertically; column counts must agree.
Var concat_rows(std::span<const Var> parts);
Var concat_rows(std::initializer_list<Var> parts);
/// Places column vectors side by side.
Var hstack(std::span<const Var> columns);
/// Column j of `m` as a column vector.
Var column(Var m, std::size_t j);
Var col_mean(Var m);
/// Elementwise maximum over columns; ties route the gradient to the first maximum.
Var col_max(Var m);
Var col_sum(Var m);
/// Softmax across the columns of each row, so every row sums to one.
Var row_softmax(Var m);
/// Softmax taken independently per coordinate across a list of same-shape vectors.
std::vector<Var> softmax_across(std::span<const Var> vectors);
/// Sum of absolute differences, as a 1×1 value.
Var l1_distance(Var a, Var b);
/// Sum of all elements, as a 1×1 value.
Var sum(Var x);
/// Minimum of 1×1 values.
Var min_of(std::span<const Var> scalars);
/// Mean of same-shape values. Each coordinate is summed in ascending value
/// order, so the result does not depend on the order of `parts`.
Var mean_sorted(std::span<const Var> parts);

}  // namespace tcqa
