#include "tcqa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tcqa/errors.hpp"
#include "tcqa/params.hpp"

namespace tcqa {

namespace {

Tape& tape_of(std::initializer_list<Var> vars) {
    Tape* t = nullptr;
    for (const auto& v : vars) {
        if (!v.valid()) throw StateError("operation on an unrecorded value");
        if (t && t != v.tape()) throw StateError("operands belong to different tapes");
        t = v.tape();
    }
    return *t;
}

Tape& tape_of(std::span<const Var> vars) {
    if (vars.empty()) throw PreconditionError("operation needs at least one operand");
    Tape* t = nullptr;
    for (const auto& v : vars) {
        if (!v.valid()) throw StateError("operation on an unrecorded value");
        if (t && t != v.tape()) throw StateError("operands belong to different tapes");
        t = v.tape();
    }
    return *t;
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_mismatch(op, a, b);
}

std::vector<std::size_t> ids(std::span<const Var> vars) {
    std::vector<std::size_t> out;
    out.reserve(vars.size());
    for (const auto& v : vars) out.push_back(v.id());
    return out;
}

template <typename F>
Var unary(Var x, F&& value_fn, std::function<double(double x, double y)> deriv) {
    Tape& t = tape_of({x});
    const Tensor& xv = x.value();
    Tensor out(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = value_fn(xv[i]);
    std::size_t xi = x.id();
    return t.record(std::move(out), [xi, deriv](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        const Tensor& xv = tape.value(xi);
        const Tensor& yv = tape.value(self);
        Tensor& gx = tape.grad(xi);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i], yv[i]);
    });
}

}  // namespace

const Tensor& Var::value() const {
    if (!tape_) throw StateError("value of an unrecorded variable");
    return tape_->value(id_);
}

Var Tape::record(Tensor value, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), {}, std::move(backward), {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return record(std::move(value), {}); }

Var Tape::leaf(ParameterStore& store, std::size_t param, std::size_t offset, std::size_t rows,
               std::size_t cols) {
    auto key = std::make_tuple(static_cast<const ParameterStore*>(&store), param, offset);
    if (auto it = leaf_cache_.find(key); it != leaf_cache_.end()) {
        return Var(this, it->second);
    }
    const Tensor& src = store.value(param);
    std::vector<double> data(src.data().begin() + static_cast<std::ptrdiff_t>(offset),
                             src.data().begin() + static_cast<std::ptrdiff_t>(offset + rows * cols));
    Var v = record(Tensor(rows, cols, std::move(data)), {});
    nodes_.back().binding = {&store, param, offset};
    stores_.insert(&store);
    leaf_cache_.emplace(key, v.id());
    return v;
}

Var Tape::parameter(ParameterStore& store, std::string_view name) {
    std::size_t i = store.index(name);
    const Tensor& p = store.value(i);
    return leaf(store, i, 0, p.rows(), p.cols());
}

Var Tape::parameter_row(ParameterStore& store, std::string_view name, std::size_t row) {
    std::size_t i = store.index(name);
    const Tensor& p = store.value(i);
    if (row >= p.rows()) {
        throw LookupError("row " + std::to_string(row) + " out of range for parameter '" +
                          std::string(name) + "' " + p.shape_string());
    }
    return leaf(store, i, row * p.cols(), p.cols(), 1);
}

Tensor& Tape::grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) {
        n.grad = Tensor(n.value.rows(), n.value.cols());
    }
    return n.grad;
}

void Tape::backward(Var loss) {
    if (nodes_.empty() || loss.tape() != this || loss.id() >= nodes_.size()) {
        throw StateError("backward called without a recorded forward computation");
    }
    if (loss.value().size() != 1) {
        throw DimensionError("backward needs a scalar loss, got " + loss.value().shape_string());
    }
    for (auto& n : nodes_) n.grad = Tensor();
    for (ParameterStore* s : stores_) s->zero_grad();

    grad(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad.empty()) continue;
        if (n.backward) n.backward(*this, i);
        if (n.binding.store) {
            Tensor& dst = n.binding.store->grad(n.binding.param);
            for (std::size_t k = 0; k < n.grad.size(); ++k) dst[n.binding.offset + k] += n.grad[k];
        }
    }
}

Var matmul(Var a, Var b) {
    Tape& t = tape_of({a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows()) shape_mismatch("matmul", av, bv);
    const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
    Tensor out(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            double aip = av(i, p);
            for (std::size_t j = 0; j < m; ++j) out(i, j) += aip * bv(p, j);
        }
    }
    std::size_t ai = a.id(), bi = b.id();
    return t.record(std::move(out), [ai, bi, n, k, m](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        const Tensor& av = tape.value(ai);
        const Tensor& bv = tape.value(bi);
        Tensor& ga = tape.grad(ai);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
                double acc = 0.0;
                for (std::size_t j = 0; j < m; ++j) acc += g(i, j) * bv(p, j);
                ga(i, p) += acc;
            }
        }
        Tensor& gb = tape.grad(bi);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
                double aip = av(i, p);
                for (std::size_t j = 0; j < m; ++j) gb(p, j) += aip * g(i, j);
            }
        }
    });
}

Var operator+(Var a, Var b) {
    Tape& t = tape_of({a, b});
    require_same("add", a.value(), b.value());
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    std::size_t ai = a.id(), bi = b.id();
    return t.record(std::move(out), [ai, bi](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        Tensor& ga = tape.grad(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        Tensor& gb = tape.grad(bi);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    });
}

Var operator-(Var a, Var b) {
    Tape& t = tape_of({a, b});
    require_same("subtract", a.value(), b.value());
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    std::size_t ai = a.id(), bi = b.id();
    return t.record(std::move(out), [ai, bi](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        Tensor& ga = tape.grad(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        Tensor& gb = tape.grad(bi);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    });
}

Var hadamard(Var a, Var b) {
    Tape& t = tape_of({a, b});
    require_same("hadamard", a.value(), b.value());
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    std::size_t ai = a.id(), bi = b.id();
    return t.record(std::move(out), [ai, bi](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        const Tensor& av = tape.value(ai);
        const Tensor& bv = tape.value(bi);
        Tensor& ga = tape.grad(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        Tensor& gb = tape.grad(bi);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    });
}

Var add_bias(Var m, Var bias) {
    Tape& t = tape_of({m, bias});
    const Tensor& mv = m.value();
    const Tensor& bv = bias.value();
    if (bv.cols() != 1 || bv.rows() != mv.rows()) shape_mismatch("add_bias", mv, bv);
    Tensor out = mv;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[r];
    }
    std::size_t mi = m.id(), bi = bias.id();
    return t.record(std::move(out), [mi, bi](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        Tensor& gm = tape.grad(mi);
        for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
        Tensor& gb = tape.grad(bi);
        for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < g.cols(); ++c) gb[r] += g(r, c);
        }
    });
}

Var one_minus(Var x) {
    return unary(x, [](double v) { return 1.0 - v; }, [](double, double) { return -1.0; });
}

Var scale(Var x, double factor) {
    return unary(x, [factor](double v) { return factor * v; },
                 [factor](double, double) { return factor; });
}

Var sigmoid(Var x) {
    return unary(
        x,
        [](double v) {
            if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
            double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var x) {
    // NaN passes through so a poisoned loss is not masked as zero.
    return unary(x, [](double v) { return v <= 0 ? 0.0 : v; },
                 [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Var concat_rows(std::span<const Var> parts) {
    Tape& t = tape_of(parts);
    std::size_t cols = parts.front().cols();
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) shape_mismatch("concat_rows", parts.front().value(), p.value());
        rows += p.rows();
    }
    std::vector<double> data;
    data.reserve(rows * cols);
    for (const auto& p : parts) {
        auto d = p.value().data();
        data.insert(data.end(), d.begin(), d.end());
    }
    auto in = ids(parts);
    return t.record(Tensor(rows, cols, std::move(data)), [in](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        std::size_t offset = 0;
        for (std::size_t id : in) {
            Tensor& gp = tape.grad(id);
            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
            offset += gp.size();
        }
    });
}

Var concat_rows(std::initializer_list<Var> parts) {
    return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

Var hstack(std::span<const Var> columns) {
    Tape& t = tape_of(columns);
    std::size_t rows = columns.front().rows();
    for (const auto& c : columns) {
        if (c.cols() != 1 || c.rows() != rows) {
            shape_mismatch("hstack", columns.front().value(), c.value());
        }
    }
    std::size_t n = columns.size();
    Tensor out(rows, n);
    for (std::size_t j = 0; j < n; ++j) {
        const Tensor& cv = columns[j].value();
        for (std::size_t r = 0; r < rows; ++r) out(r, j) = cv[r];
    }
    auto in = ids(columns);
    return t.record(std::move(out), [in](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        for (std::size_t j = 0; j < in.size(); ++j) {
            Tensor& gc = tape.grad(in[j]);
            for (std::size_t r = 0; r < gc.size(); ++r) gc[r] += g(r, j);
        }
    });
}

Var column(Var m, std::size_t j) {
    Tape& t = tape_of({m});
    const Tensor& mv = m.value();
    if (j >= mv.cols()) {
        throw DimensionError("column " + std::to_string(j) + " out of range for " + mv.shape_string());
    }
    Tensor out(mv.rows(), 1);
    for (std::size_t r = 0; r < mv.rows(); ++r) out[r] = mv(r, j);
    std::size_t mi = m.id();
    return t.record(std::move(out), [mi, j](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        Tensor& gm = tape.grad(mi);
        for (std::size_t r = 0; r < g.size(); ++r) gm(r, j) += g[r];
    });
}

Var col_mean(Var m) {
    Tape& t = tape_of({m});
    const Tensor& mv = m.value();
    if (mv.cols() == 0) throw DimensionError("col_mean of an empty matrix");
    Tensor out(mv.rows(), 1);
    double inv = 1.0 / static_cast<double>(mv.cols());
    for (std::size_t r = 0; r < mv.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < mv.cols(); ++c) acc += mv(r, c);
        out[r] = acc * inv;
    }
    std::size_t mi = m.id();
    return t.record(std::move(out), [mi, inv](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        Tensor& gm = tape.grad(mi);
        for (std::size_t r = 0; r < gm.rows(); ++r) {
            for (std::size_t c = 0; c < gm.cols(); ++c) gm(r, c) += g[r] * inv;
        }
    });
}

Var col_sum(Var m) {
    Tape& t = tape_of({m});
    const Tensor& mv = m.value();
    Tensor out(mv.rows(), 1);
    for (std::size_t r = 0; r < mv.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < mv.cols(); ++c) acc += mv(r, c);
        out[r] = acc;
    }
    std::size_t mi = m.id();
    return t.record(std::move(out), [mi](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        Tensor& gm = tape.grad(mi);
        for (std::size_t r = 0; r < gm.rows(); ++r) {
            for (std::size_t c = 0; c < gm.cols(); ++c) gm(r, c) += g[r];
        }
    });
}

Var col_max(Var m) {
    Tape& t = tape_of({m});
    const Tensor& mv = m.value();
    if (mv.cols() == 0) throw DimensionError("col_max of an empty matrix");
    Tensor out(mv.rows(), 1);
    std::vector<std::size_t> arg(mv.rows(), 0);
    for (std::size_t r = 0; r < mv.rows(); ++r) {
        for (std::size_t c = 1; c < mv.cols(); ++c) {
            if (mv(r, c) > mv(r, arg[r])) arg[r] = c;
        }
        out[r] = mv(r, arg[r]);
    }
    std::size_t mi = m.id();
    return t.record(std::move(out), [mi, arg](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        Tensor& gm = tape.grad(mi);
        for (std::size_t r = 0; r < g.size(); ++r) gm(r, arg[r]) += g[r];
    });
}

Var row_softmax(Var m) {
    Tape& t = tape_of({m});
    const Tensor& mv = m.value();
    Tensor out(mv.rows(), mv.cols());
    for (std::size_t r = 0; r < mv.rows(); ++r) {
        double mx = -INFINITY;
        for (std::size_t c = 0; c < mv.cols(); ++c) mx = std::max(mx, mv(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < mv.cols(); ++c) {
            out(r, c) = std::exp(mv(r, c) - mx);
            z += out(r, c);
        }
        for (std::size_t c = 0; c < mv.cols(); ++c) out(r, c) /= z;
    }
    std::size_t mi = m.id();
    return t.record(std::move(out), [mi](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        const Tensor& y = tape.value(self);
        Tensor& gm = tape.grad(mi);
        for (std::size_t r = 0; r < y.rows(); ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
            for (std::size_t c = 0; c < y.cols(); ++c) gm(r, c) += y(r, c) * (g(r, c) - dot);
        }
    });
}

std::vector<Var> softmax_across(std::span<const Var> vectors) {
    Var weights = row_softmax(hstack(vectors));
    std::vector<Var> out;
    out.reserve(vectors.size());
    for (std::size_t j = 0; j < vectors.size(); ++j) out.push_back(column(weights, j));
    return out;
}

Var l1_distance(Var a, Var b) {
    Tape& t = tape_of({a, b});
    require_same("l1_distance", a.value(), b.value());
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(av[i] - bv[i]);
    std::size_t ai = a.id(), bi = b.id();
    return t.record(Tensor(1, 1, acc), [ai, bi](Tape& tape, std::size_t self) {
        double g = tape.grad(self)[0];
        const Tensor& av = tape.value(ai);
        const Tensor& bv = tape.value(bi);
        Tensor& ga = tape.grad(ai);
        Tensor& gb = tape.grad(bi);
        for (std::size_t i = 0; i < av.size(); ++i) {
            double d = av[i] - bv[i];
            double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
            ga[i] += g * s;
            gb[i] -= g * s;
        }
    });
}

Var sum(Var x) {
    Tape& t = tape_of({x});
    const Tensor& xv = x.value();
    double acc = std::accumulate(xv.data().begin(), xv.data().end(), 0.0);
    std::size_t xi = x.id();
    return t.record(Tensor(1, 1, acc), [xi](Tape& tape, std::size_t self) {
        double g = tape.grad(self)[0];
        Tensor& gx = tape.grad(xi);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
}

Var min_of(std::span<const Var> scalars) {
    Tape& t = tape_of(scalars);
    std::size_t best = 0;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        if (scalars[i].value().size() != 1) {
            throw DimensionError("min_of expects 1x1 operands, got " + scalars[i].value().shape_string());
        }
        if (scalars[i].value()[0] < scalars[best].value()[0]) best = i;
    }
    std::size_t winner = scalars[best].id();
    return t.record(Tensor(1, 1, scalars[best].value()[0]), [winner](Tape& tape, std::size_t self) {
        tape.grad(winner)[0] += tape.grad(self)[0];
    });
}

Var mean_sorted(std::span<const Var> parts) {
    Tape& t = tape_of(parts);
    const Tensor& first = parts.front().value();
    for (const auto& p : parts) require_same("mean_sorted", first, p.value());
    const double inv = 1.0 / static_cast<double>(parts.size());
    Tensor out(first.rows(), first.cols());
    std::vector<double> column_values(parts.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t k = 0; k < parts.size(); ++k) column_values[k] = parts[k].value()[i];
        std::sort(column_values.begin(), column_values.end());
        double acc = 0.0;
        for (double v : column_values) acc += v;
        out[i] = acc * inv;
    }
    auto in = ids(parts);
    return t.record(std::move(out), [in, inv](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        for (std::size_t id : in) {
            Tensor& gp = tape.grad(id);
            for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i] * inv;
        }
    });
}

}  // namespace tcqa
