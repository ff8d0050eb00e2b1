#include "linad/rules.hpp"

#include <cmath>
#include <stdexcept>

namespace linad {

namespace {

[[noreturn]] void shape_error(Prim p, const std::string& msg) {
  throw std::invalid_argument(std::string(prim_name(p)) + ": " + msg);
}

void expect_no_params(Prim p, const Params& params) {
  if (!params.empty()) {
    shape_error(p, "unexpected parameters");
  }
}

Shape broadcast_target(const Params& params) {
  auto n = find_param(params, "n");
  auto rows = find_param(params, "rows");
  auto cols = find_param(params, "cols");
  if (n && !rows && !cols && params.size() == 1) {
    if (*n < 0) {
      shape_error(Prim::broadcast, "negative target length");
    }
    return vec_shape(*n);
  }
  if (!n && rows && cols && params.size() == 2) {
    if (*rows < 0 || *cols < 0) {
      shape_error(Prim::broadcast, "negative target dimension");
    }
    return mat_shape(*rows, *cols);
  }
  shape_error(Prim::broadcast, "expected parameters {n} or {rows, cols}");
}

Params params_for_shape(const Shape& s) {
  if (s.rank() == 1) {
    return {{"n", s.dims[0]}};
  }
  if (s.rank() == 2) {
    return {{"rows", s.dims[0]}, {"cols", s.dims[1]}};
  }
  throw std::invalid_argument("broadcast: scalar target shape");
}

// ---------------------------------------------------------------------------
// Shape rules

Shape shape_elementwise2(Prim p, std::span<const Shape> ins, const Params& params) {
  expect_no_params(p, params);
  if (!(ins[0] == ins[1])) {
    shape_error(p, "shape mismatch: " + ins[0].str() + " vs " + ins[1].str());
  }
  return ins[0];
}

Shape shape_add(std::span<const Shape> ins, const Params& params) {
  return shape_elementwise2(Prim::add, ins, params);
}

Shape shape_sub(std::span<const Shape> ins, const Params& params) {
  return shape_elementwise2(Prim::sub, ins, params);
}

Shape shape_unary(Prim p, std::span<const Shape> ins, const Params& params) {
  expect_no_params(p, params);
  return ins[0];
}

Shape shape_neg(std::span<const Shape> ins, const Params& params) {
  return shape_unary(Prim::neg, ins, params);
}

Shape shape_mul(std::span<const Shape> ins, const Params& params) {
  expect_no_params(Prim::mul, params);
  if (ins[0] == ins[1]) {
    return ins[0];
  }
  if (ins[0].rank() == 0) {
    return ins[1];
  }
  if (ins[1].rank() == 0) {
    return ins[0];
  }
  shape_error(Prim::mul, "shape mismatch: " + ins[0].str() + " vs " + ins[1].str());
}

Shape shape_div(std::span<const Shape> ins, const Params& params) {
  expect_no_params(Prim::div, params);
  if (ins[0] == ins[1] || ins[1].rank() == 0) {
    return ins[0];
  }
  shape_error(Prim::div, "divisor must match the numerator shape or be scalar");
}

Shape shape_sin(std::span<const Shape> ins, const Params& params) {
  return shape_unary(Prim::sin, ins, params);
}
Shape shape_cos(std::span<const Shape> ins, const Params& params) {
  return shape_unary(Prim::cos, ins, params);
}
Shape shape_exp(std::span<const Shape> ins, const Params& params) {
  return shape_unary(Prim::exp, ins, params);
}
Shape shape_log(std::span<const Shape> ins, const Params& params) {
  return shape_unary(Prim::log, ins, params);
}

Shape shape_sum(std::span<const Shape> ins, const Params& params) {
  expect_no_params(Prim::sum, params);
  if (ins[0].rank() == 0) {
    shape_error(Prim::sum, "expected a vector or matrix, got a scalar");
  }
  return scalar_shape();
}

Shape shape_broadcast(std::span<const Shape> ins, const Params& params) {
  if (ins[0].rank() != 0) {
    shape_error(Prim::broadcast, "expected a scalar, got " + ins[0].str());
  }
  return broadcast_target(params);
}

Shape shape_dot(std::span<const Shape> ins, const Params& params) {
  expect_no_params(Prim::dot, params);
  if (ins[0].rank() != 1 || !(ins[0] == ins[1])) {
    shape_error(Prim::dot, "expected two vectors of equal length");
  }
  return scalar_shape();
}

Shape shape_matvec(std::span<const Shape> ins, const Params& params) {
  expect_no_params(Prim::matvec, params);
  if (ins[0].rank() != 2 || ins[1].rank() != 1 || ins[0].dims[1] != ins[1].dims[0]) {
    shape_error(
        Prim::matvec, "expected f64[m,n] and f64[n], got " + ins[0].str() + " and " + ins[1].str());
  }
  return vec_shape(ins[0].dims[0]);
}

Shape shape_outer(std::span<const Shape> ins, const Params& params) {
  expect_no_params(Prim::outer, params);
  if (ins[0].rank() != 1 || ins[1].rank() != 1) {
    shape_error(Prim::outer, "expected two vectors");
  }
  return mat_shape(ins[0].dims[0], ins[1].dims[0]);
}

Shape shape_transpose2d(std::span<const Shape> ins, const Params& params) {
  expect_no_params(Prim::transpose2d, params);
  if (ins[0].rank() != 2) {
    shape_error(Prim::transpose2d, "expected a matrix, got " + ins[0].str());
  }
  return mat_shape(ins[0].dims[1], ins[0].dims[0]);
}

Shape shape_slice(std::span<const Shape> ins, const Params& params) {
  if (ins[0].rank() != 1) {
    shape_error(Prim::slice, "expected a vector, got " + ins[0].str());
  }
  auto start = find_param(params, "start");
  auto stop = find_param(params, "stop");
  if (!start || !stop || params.size() != 2) {
    shape_error(Prim::slice, "expected parameters {start, stop}");
  }
  if (*start < 0 || *stop < *start || *stop > ins[0].dims[0]) {
    shape_error(Prim::slice, "bounds [" + std::to_string(*start) + ", " + std::to_string(*stop) +
                                 ") out of range for " + ins[0].str());
  }
  return vec_shape(*stop - *start);
}

Shape shape_pad_zero(std::span<const Shape> ins, const Params& params) {
  if (ins[0].rank() != 1) {
    shape_error(Prim::pad_zero, "expected a vector, got " + ins[0].str());
  }
  auto start = find_param(params, "start");
  auto total = find_param(params, "total");
  if (!start || !total || params.size() != 2) {
    shape_error(Prim::pad_zero, "expected parameters {start, total}");
  }
  if (*start < 0 || *start + ins[0].dims[0] > *total) {
    shape_error(Prim::pad_zero, "segment [" + std::to_string(*start) + ", " +
                                    std::to_string(*start + ins[0].dims[0]) +
                                    ") does not fit in length " + std::to_string(*total));
  }
  return vec_shape(*total);
}

Shape shape_concat(std::span<const Shape> ins, const Params& params) {
  expect_no_params(Prim::concat, params);
  if (ins[0].rank() != 1 || ins[1].rank() != 1) {
    shape_error(Prim::concat, "expected two vectors");
  }
  return vec_shape(ins[0].dims[0] + ins[1].dims[0]);
}

// ---------------------------------------------------------------------------
// Evaluation semantics. Accumulations run left to right in definition order
// so results are reproducible bit for bit.

Tensor eval_add(std::span<const Tensor> ins, const Params&) {
  Tensor out = ins[0];
  for (size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] += ins[1].data[i];
  }
  return out;
}

Tensor eval_sub(std::span<const Tensor> ins, const Params&) {
  Tensor out = ins[0];
  for (size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] -= ins[1].data[i];
  }
  return out;
}

Tensor eval_neg(std::span<const Tensor> ins, const Params&) {
  Tensor out = ins[0];
  for (auto& v : out.data) {
    v = -v;
  }
  return out;
}

Tensor eval_mul(std::span<const Tensor> ins, const Params&) {
  if (ins[0].shape == ins[1].shape) {
    Tensor out = ins[0];
    for (size_t i = 0; i < out.data.size(); ++i) {
      out.data[i] *= ins[1].data[i];
    }
    return out;
  }
  bool x_scalar = ins[0].shape.rank() == 0;
  const Tensor& full = x_scalar ? ins[1] : ins[0];
  double s = (x_scalar ? ins[0] : ins[1]).data[0];
  Tensor out = full;
  for (auto& v : out.data) {
    v *= s;
  }
  return out;
}

Tensor eval_div(std::span<const Tensor> ins, const Params&) {
  Tensor out = ins[0];
  if (ins[1].shape.rank() == 0 && ins[0].shape.rank() != 0) {
    double s = ins[1].data[0];
    for (auto& v : out.data) {
      v /= s;
    }
  } else {
    for (size_t i = 0; i < out.data.size(); ++i) {
      out.data[i] /= ins[1].data[i];
    }
  }
  return out;
}

Tensor eval_map(std::span<const Tensor> ins, double (*f)(double)) {
  Tensor out = ins[0];
  for (auto& v : out.data) {
    v = f(v);
  }
  return out;
}

Tensor eval_sin(std::span<const Tensor> ins, const Params&) {
  return eval_map(ins, [](double x) { return std::sin(x); });
}
Tensor eval_cos(std::span<const Tensor> ins, const Params&) {
  return eval_map(ins, [](double x) { return std::cos(x); });
}
Tensor eval_exp(std::span<const Tensor> ins, const Params&) {
  return eval_map(ins, [](double x) { return std::exp(x); });
}
Tensor eval_log(std::span<const Tensor> ins, const Params&) {
  return eval_map(ins, [](double x) { return std::log(x); });
}

Tensor eval_sum(std::span<const Tensor> ins, const Params&) {
  double acc = 0.0;
  for (auto v : ins[0].data) {
    acc += v;
  }
  return Tensor::scalar(acc);
}

Tensor eval_broadcast(std::span<const Tensor> ins, const Params& params) {
  Shape target = broadcast_target(params);
  return Tensor(target, std::vector<double>(static_cast<size_t>(target.count()), ins[0].data[0]));
}

Tensor eval_dot(std::span<const Tensor> ins, const Params&) {
  double acc = 0.0;
  for (size_t i = 0; i < ins[0].data.size(); ++i) {
    acc += ins[0].data[i] * ins[1].data[i];
  }
  return Tensor::scalar(acc);
}

Tensor eval_matvec(std::span<const Tensor> ins, const Params&) {
  auto m = static_cast<size_t>(ins[0].shape.dims[0]);
  auto n = static_cast<size_t>(ins[0].shape.dims[1]);
  std::vector<double> out(m, 0.0);
  for (size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (size_t j = 0; j < n; ++j) {
      acc += ins[0].data[i * n + j] * ins[1].data[j];
    }
    out[i] = acc;
  }
  return Tensor::vec(std::move(out));
}

Tensor eval_outer(std::span<const Tensor> ins, const Params&) {
  auto m = ins[0].data.size();
  auto n = ins[1].data.size();
  std::vector<double> out(m * n);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) {
      out[i * n + j] = ins[0].data[i] * ins[1].data[j];
    }
  }
  return Tensor::mat(static_cast<std::int64_t>(m), static_cast<std::int64_t>(n), std::move(out));
}

Tensor eval_transpose2d(std::span<const Tensor> ins, const Params&) {
  auto m = static_cast<size_t>(ins[0].shape.dims[0]);
  auto n = static_cast<size_t>(ins[0].shape.dims[1]);
  std::vector<double> out(m * n);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) {
      out[j * m + i] = ins[0].data[i * n + j];
    }
  }
  return Tensor::mat(static_cast<std::int64_t>(n), static_cast<std::int64_t>(m), std::move(out));
}

Tensor eval_slice(std::span<const Tensor> ins, const Params& params) {
  auto start = static_cast<size_t>(get_param(params, "start"));
  auto stop = static_cast<size_t>(get_param(params, "stop"));
  return Tensor::vec({ins[0].data.begin() + start, ins[0].data.begin() + stop});
}

Tensor eval_pad_zero(std::span<const Tensor> ins, const Params& params) {
  auto start = static_cast<size_t>(get_param(params, "start"));
  auto total = static_cast<size_t>(get_param(params, "total"));
  std::vector<double> out(total, 0.0);
  for (size_t i = 0; i < ins[0].data.size(); ++i) {
    out[start + i] = ins[0].data[i];
  }
  return Tensor::vec(std::move(out));
}

Tensor eval_concat(std::span<const Tensor> ins, const Params&) {
  std::vector<double> out = ins[0].data;
  out.insert(out.end(), ins[1].data.begin(), ins[1].data.end());
  return Tensor::vec(std::move(out));
}

// ---------------------------------------------------------------------------
// JVP rules. Symbolic-zero tangents short-circuit: rules emit only the
// surviving terms and return nullopt when every term vanishes.

std::string dname(const Equation& eqn) {
  return "d" + eqn.out.name;
}

TangentAtom jvp_add(const Equation& eqn, std::span<const TangentAtom> t, ProgramBuilder& sink) {
  if (t[0] && t[1]) {
    return sink.emit(Prim::add, {*t[0], *t[1]}, {}, dname(eqn));
  }
  if (t[0]) {
    return t[0];
  }
  return t[1];
}

TangentAtom jvp_sub(const Equation& eqn, std::span<const TangentAtom> t, ProgramBuilder& sink) {
  if (t[0] && t[1]) {
    return sink.emit(Prim::sub, {*t[0], *t[1]}, {}, dname(eqn));
  }
  if (t[0]) {
    return t[0];
  }
  if (t[1]) {
    return sink.emit(Prim::neg, {*t[1]}, {}, dname(eqn));
  }
  return std::nullopt;
}

TangentAtom jvp_neg(const Equation& eqn, std::span<const TangentAtom> t, ProgramBuilder& sink) {
  if (!t[0]) {
    return std::nullopt;
  }
  return sink.emit(Prim::neg, {*t[0]}, {}, dname(eqn));
}

TangentAtom jvp_mul(const Equation& eqn, std::span<const TangentAtom> t, ProgramBuilder& sink) {
  if (t[0] && t[1]) {
    Atom a = sink.emit(Prim::mul, {*t[0], eqn.inputs[1]});
    Atom b = sink.emit(Prim::mul, {eqn.inputs[0], *t[1]});
    return sink.emit(Prim::add, {a, b}, {}, dname(eqn));
  }
  if (t[0]) {
    return sink.emit(Prim::mul, {*t[0], eqn.inputs[1]}, {}, dname(eqn));
  }
  if (t[1]) {
    return sink.emit(Prim::mul, {eqn.inputs[0], *t[1]}, {}, dname(eqn));
  }
  return std::nullopt;
}

TangentAtom jvp_div(const Equation& eqn, std::span<const TangentAtom> t, ProgramBuilder& sink) {
  // d(x/y) = tx/y - x*ty/y^2
  TangentAtom num_term;
  if (t[0]) {
    num_term = sink.emit(Prim::div, {*t[0], eqn.inputs[1]}, {}, t[1] ? "t" : dname(eqn));
  }
  if (!t[1]) {
    return num_term;
  }
  Atom xty = sink.emit(Prim::mul, {eqn.inputs[0], *t[1]});
  Atom yy = sink.emit(Prim::mul, {eqn.inputs[1], eqn.inputs[1]});
  Atom den_term = sink.emit(Prim::div, {xty, yy});
  if (num_term) {
    return sink.emit(Prim::sub, {*num_term, den_term}, {}, dname(eqn));
  }
  return sink.emit(Prim::neg, {den_term}, {}, dname(eqn));
}

TangentAtom jvp_sin(const Equation& eqn, std::span<const TangentAtom> t, ProgramBuilder& sink) {
  if (!t[0]) {
    return std::nullopt;
  }
  Atom c = sink.emit(Prim::cos, {eqn.inputs[0]});
  return sink.emit(Prim::mul, {c, *t[0]}, {}, dname(eqn));
}

TangentAtom jvp_cos(const Equation& eqn, std::span<const TangentAtom> t, ProgramBuilder& sink) {
  if (!t[0]) {
    return std::nullopt;
  }
  Atom s = sink.emit(Prim::sin, {eqn.inputs[0]});
  Atom m = sink.emit(Prim::mul, {s, *t[0]});
  return sink.emit(Prim::neg, {m}, {}, dname(eqn));
}

TangentAtom jvp_exp(const Equation& eqn, std::span<const TangentAtom> t, ProgramBuilder& sink) {
  if (!t[0]) {
    return std::nullopt;
  }
  // The primal output is exp(x); reuse it instead of recomputing.
  return sink.emit(Prim::mul, {Atom(eqn.out), *t[0]}, {}, dname(eqn));
}

TangentAtom jvp_log(const Equation& eqn, std::span<const TangentAtom> t, ProgramBuilder& sink) {
  if (!t[0]) {
    return std::nullopt;
  }
  return sink.emit(Prim::div, {*t[0], eqn.inputs[0]}, {}, dname(eqn));
}

TangentAtom jvp_sum(const Equation& eqn, std::span<const TangentAtom> t, ProgramBuilder& sink) {
  if (!t[0]) {
    return std::nullopt;
  }
  return sink.emit(Prim::sum, {*t[0]}, {}, dname(eqn));
}

TangentAtom jvp_same_params(
    const Equation& eqn, std::span<const TangentAtom> t, ProgramBuilder& sink) {
  if (!t[0]) {
    return std::nullopt;
  }
  return sink.emit(eqn.prim, {*t[0]}, eqn.params, dname(eqn));
}

TangentAtom jvp_bilinear2(
    const Equation& eqn, std::span<const TangentAtom> t, ProgramBuilder& sink) {
  if (t[0] && t[1]) {
    Atom a = sink.emit(eqn.prim, {*t[0], eqn.inputs[1]});
    Atom b = sink.emit(eqn.prim, {eqn.inputs[0], *t[1]});
    return sink.emit(Prim::add, {a, b}, {}, dname(eqn));
  }
  if (t[0]) {
    return sink.emit(eqn.prim, {*t[0], eqn.inputs[1]}, {}, dname(eqn));
  }
  if (t[1]) {
    return sink.emit(eqn.prim, {eqn.inputs[0], *t[1]}, {}, dname(eqn));
  }
  return std::nullopt;
}

TangentAtom jvp_concat(const Equation& eqn, std::span<const TangentAtom> t, ProgramBuilder& sink) {
  if (!t[0] && !t[1]) {
    return std::nullopt;
  }
  // A missing side keeps its slot as an explicit zero block.
  Atom a = t[0] ? *t[0] : Atom(Tensor::zeros(eqn.inputs[0].shape()));
  Atom b = t[1] ? *t[1] : Atom(Tensor::zeros(eqn.inputs[1].shape()));
  return sink.emit(Prim::concat, {a, b}, {}, dname(eqn));
}

// ---------------------------------------------------------------------------
// Transpose rules, defined only for the linear primitives. `known[i]` is the
// operand's value as an atom of the program under construction; unknown
// operands receive a cotangent contribution.

using Contributions = std::vector<std::optional<Atom>>;

Contributions tr_add(
    const Equation&, const Atom& ct, std::span<const std::optional<Atom>> known,
    ProgramBuilder&) {
  Contributions r(2);
  for (int i = 0; i < 2; ++i) {
    if (!known[i]) {
      r[i] = ct;
    }
  }
  return r;
}

Contributions tr_sub(
    const Equation&, const Atom& ct, std::span<const std::optional<Atom>> known,
    ProgramBuilder& sink) {
  Contributions r(2);
  if (!known[0]) {
    r[0] = ct;
  }
  if (!known[1]) {
#ifdef LINAD_MUTATE_SUB_TRANSPOSE
    // Mutation-canary build: deliberately wrong sign so the self-check
    // harness can prove it has teeth.
    (void)sink;
    r[1] = ct;
#else
    r[1] = sink.emit(Prim::neg, {ct});
#endif
  }
  return r;
}

Contributions tr_neg(
    const Equation&, const Atom& ct, std::span<const std::optional<Atom>>, ProgramBuilder& sink) {
  return {sink.emit(Prim::neg, {ct})};
}

Contributions tr_mul(
    const Equation& eqn, const Atom& ct, std::span<const std::optional<Atom>> known,
    ProgramBuilder& sink) {
  Contributions r(2);
  int u = known[0] ? 1 : 0;
  const Atom& k = *known[1 - u];
  Atom g = sink.emit(Prim::mul, {k, ct});
  if (eqn.inputs[u].shape().rank() == 0 && k.shape().rank() != 0) {
    // tensor * scalar: the scalar's cotangent gathers every element.
    g = sink.emit(Prim::sum, {g});
  }
  r[u] = g;
  return r;
}

Contributions tr_div(
    const Equation&, const Atom& ct, std::span<const std::optional<Atom>> known,
    ProgramBuilder& sink) {
  Contributions r(2);
  r[0] = sink.emit(Prim::div, {ct, *known[1]});
  return r;
}

Contributions tr_sum(
    const Equation& eqn, const Atom& ct, std::span<const std::optional<Atom>>,
    ProgramBuilder& sink) {
  return {sink.emit(Prim::broadcast, {ct}, params_for_shape(eqn.inputs[0].shape()))};
}

Contributions tr_broadcast(
    const Equation&, const Atom& ct, std::span<const std::optional<Atom>>, ProgramBuilder& sink) {
  return {sink.emit(Prim::sum, {ct})};
}

Contributions tr_dot(
    const Equation&, const Atom& ct, std::span<const std::optional<Atom>> known,
    ProgramBuilder& sink) {
  Contributions r(2);
  int u = known[0] ? 1 : 0;
  r[u] = sink.emit(Prim::mul, {ct, *known[1 - u]});
  return r;
}

Contributions tr_matvec(
    const Equation&, const Atom& ct, std::span<const std::optional<Atom>> known,
    ProgramBuilder& sink) {
  Contributions r(2);
  if (!known[0]) {
    r[0] = sink.emit(Prim::outer, {ct, *known[1]});
  } else {
    Atom mt = sink.emit(Prim::transpose2d, {*known[0]});
    r[1] = sink.emit(Prim::matvec, {mt, ct});
  }
  return r;
}

Contributions tr_outer(
    const Equation&, const Atom& ct, std::span<const std::optional<Atom>> known,
    ProgramBuilder& sink) {
  Contributions r(2);
  if (!known[0]) {
    r[0] = sink.emit(Prim::matvec, {ct, *known[1]});
  } else {
    Atom ctt = sink.emit(Prim::transpose2d, {ct});
    r[1] = sink.emit(Prim::matvec, {ctt, *known[0]});
  }
  return r;
}

Contributions tr_transpose2d(
    const Equation&, const Atom& ct, std::span<const std::optional<Atom>>, ProgramBuilder& sink) {
  return {sink.emit(Prim::transpose2d, {ct})};
}

Contributions tr_slice(
    const Equation& eqn, const Atom& ct, std::span<const std::optional<Atom>>,
    ProgramBuilder& sink) {
  auto start = get_param(eqn.params, "start");
  auto total = eqn.inputs[0].shape().dims[0];
  return {sink.emit(Prim::pad_zero, {ct}, {{"start", start}, {"total", total}})};
}

Contributions tr_pad_zero(
    const Equation& eqn, const Atom& ct, std::span<const std::optional<Atom>>,
    ProgramBuilder& sink) {
  auto start = get_param(eqn.params, "start");
  auto len = eqn.inputs[0].shape().dims[0];
  return {sink.emit(Prim::slice, {ct}, {{"start", start}, {"stop", start + len}})};
}

Contributions tr_concat(
    const Equation& eqn, const Atom& ct, std::span<const std::optional<Atom>> known,
    ProgramBuilder& sink) {
  Contributions r(2);
  auto m = eqn.inputs[0].shape().dims[0];
  auto n = eqn.inputs[1].shape().dims[0];
  if (!known[0]) {
    r[0] = sink.emit(Prim::slice, {ct}, {{"start", std::int64_t(0)}, {"stop", m}});
  }
  if (!known[1]) {
    r[1] = sink.emit(Prim::slice, {ct}, {{"start", m}, {"stop", m + n}});
  }
  return r;
}

// ---------------------------------------------------------------------------
// Registry. Indexed by the Prim tag; transpose is null exactly for the four
// nonlinear primitives.

constexpr std::uint8_t kBoth = 0b11;
constexpr std::uint8_t kFirst = 0b01;

const PrimitiveSpec kTable[] = {
    {Prim::add, "add", 2, Linearity::linear, kBoth, shape_add, eval_add, jvp_add, tr_add},
    {Prim::sub, "sub", 2, Linearity::linear, kBoth, shape_sub, eval_sub, jvp_sub, tr_sub},
    {Prim::neg, "neg", 1, Linearity::linear, kFirst, shape_neg, eval_neg, jvp_neg, tr_neg},
    {Prim::mul, "mul", 2, Linearity::linear_per_operand, kBoth, shape_mul, eval_mul, jvp_mul,
     tr_mul},
    {Prim::div, "div", 2, Linearity::linear_in_position, kFirst, shape_div, eval_div, jvp_div,
     tr_div},
    {Prim::sin, "sin", 1, Linearity::nonlinear, 0, shape_sin, eval_sin, jvp_sin, nullptr},
    {Prim::cos, "cos", 1, Linearity::nonlinear, 0, shape_cos, eval_cos, jvp_cos, nullptr},
    {Prim::exp, "exp", 1, Linearity::nonlinear, 0, shape_exp, eval_exp, jvp_exp, nullptr},
    {Prim::log, "log", 1, Linearity::nonlinear, 0, shape_log, eval_log, jvp_log, nullptr},
    {Prim::sum, "sum", 1, Linearity::linear, kFirst, shape_sum, eval_sum, jvp_sum, tr_sum},
    {Prim::broadcast, "broadcast", 1, Linearity::linear, kFirst, shape_broadcast, eval_broadcast,
     jvp_same_params, tr_broadcast},
    {Prim::dot, "dot", 2, Linearity::linear_per_operand, kBoth, shape_dot, eval_dot,
     jvp_bilinear2, tr_dot},
    {Prim::matvec, "matvec", 2, Linearity::linear_per_operand, kBoth, shape_matvec, eval_matvec,
     jvp_bilinear2, tr_matvec},
    {Prim::outer, "outer", 2, Linearity::linear_per_operand, kBoth, shape_outer, eval_outer,
     jvp_bilinear2, tr_outer},
    {Prim::transpose2d, "transpose2d", 1, Linearity::linear, kFirst, shape_transpose2d,
     eval_transpose2d, jvp_same_params, tr_transpose2d},
    {Prim::slice, "slice", 1, Linearity::linear, kFirst, shape_slice, eval_slice,
     jvp_same_params, tr_slice},
    {Prim::pad_zero, "pad_zero", 1, Linearity::linear, kFirst, shape_pad_zero, eval_pad_zero,
     jvp_same_params, tr_pad_zero},
    {Prim::concat, "concat", 2, Linearity::linear, kBoth, shape_concat, eval_concat, jvp_concat,
     tr_concat},
};

} // namespace

std::span<const PrimitiveSpec> primitive_table() {
  return kTable;
}

const PrimitiveSpec& prim_spec(Prim p) {
  return kTable[static_cast<int>(p)];
}

const char* prim_name(Prim p) {
  return prim_spec(p).name;
}

std::optional<Prim> prim_from_name(const std::string& name) {
  for (auto& spec : kTable) {
    if (name == spec.name) {
      return spec.prim;
    }
  }
  return std::nullopt;
}

Shape infer_shape(Prim p, std::span<const Shape> ins, const Params& params) {
  auto& spec = prim_spec(p);
  if (static_cast<int>(ins.size()) != spec.arity) {
    throw std::invalid_argument(
        std::string(spec.name) + ": expected " + std::to_string(spec.arity) + " inputs, got " +
        std::to_string(ins.size()));
  }
  return spec.shape(ins, params);
}

Tensor eval_prim(Prim p, std::span<const Tensor> ins, const Params& params) {
  return prim_spec(p).eval(ins, params);
}

ProgramBuilder::ProgramBuilder(std::string name) {
  prog_.name = std::move(name);
}

std::string ProgramBuilder::fresh_name(const std::string& hint) {
  if (hint != "t" && !used_.count(hint)) {
    used_.insert(hint);
    return hint;
  }
  for (int k = 0;; ++k) {
    std::string name = hint + std::to_string(k);
    if (!used_.count(name)) {
      used_.insert(name);
      return name;
    }
  }
}

Var ProgramBuilder::add_input(const std::string& hint, const Shape& shape) {
  Var v{fresh_name(hint), shape};
  prog_.inputs.push_back(v);
  return v;
}

void ProgramBuilder::add_input_verbatim(const Var& v) {
  used_.insert(v.name);
  prog_.inputs.push_back(v);
}

void ProgramBuilder::reserve(const std::string& name) {
  used_.insert(name);
}

void ProgramBuilder::append(Equation eqn) {
  used_.insert(eqn.out.name);
  prog_.eqns.push_back(std::move(eqn));
}

Atom ProgramBuilder::emit(
    Prim prim, std::vector<Atom> inputs, Params params, const std::string& hint) {
  std::vector<Shape> shapes;
  shapes.reserve(inputs.size());
  for (auto& a : inputs) {
    shapes.push_back(a.shape());
  }
  Shape out_shape = infer_shape(prim, shapes, params);
  Var out{fresh_name(hint), out_shape};
  prog_.eqns.push_back(Equation{out, prim, std::move(inputs), std::move(params)});
  return Atom(out);
}

void ProgramBuilder::set_outputs(std::vector<Atom> outputs) {
  prog_.outputs = std::move(outputs);
}

TangentAtom apply_jvp_rule(
    const Equation& eqn, std::span<const TangentAtom> tangents, ProgramBuilder& sink) {
  auto& spec = prim_spec(eqn.prim);
  if (static_cast<int>(tangents.size()) != spec.arity) {
    throw std::invalid_argument(
        "[jvp] " + std::string(spec.name) + ": tangent count does not match arity");
  }
  for (size_t i = 0; i < tangents.size(); ++i) {
    if (tangents[i] && !(tangents[i]->shape() == eqn.inputs[i].shape())) {
      throw std::invalid_argument(
          "[jvp] " + std::string(spec.name) + ": tangent " + std::to_string(i) + " has shape " +
          tangents[i]->shape().str() + ", input has " + eqn.inputs[i].shape().str());
    }
  }
  return spec.jvp(eqn, tangents, sink);
}

std::vector<std::optional<Atom>> apply_transpose_rule(
    const Equation& eqn, const Atom& ct, std::span<const std::optional<Atom>> known,
    ProgramBuilder& sink) {
  auto& spec = prim_spec(eqn.prim);
  if (!spec.transpose) {
    throw std::invalid_argument(
        "[transpose] " + std::string(spec.name) + " is nonlinear and has no transpose rule");
  }
  if (!(ct.shape() == eqn.out.shape)) {
    throw std::invalid_argument(
        "[transpose] cotangent shape " + ct.shape().str() + " does not match output " +
        eqn.out.shape.str());
  }
  int unknowns = 0;
  for (size_t i = 0; i < known.size(); ++i) {
    if (!known[i]) {
      unknowns++;
      if (spec.linearity != Linearity::linear && !(spec.linear_positions & (1u << i))) {
        throw std::logic_error(
            "[transpose] " + std::string(spec.name) + ": operand " + std::to_string(i) +
            " cannot receive a cotangent (not a linear position)");
      }
    }
  }
  if (unknowns == 0) {
    return std::vector<std::optional<Atom>>(known.size());
  }
  if (unknowns > 1 && spec.linearity != Linearity::linear) {
    throw std::logic_error(
        "[transpose] " + std::string(spec.name) +
        ": two unknown operands in a per-operand-linear primitive (structural-linearity "
        "violation)");
  }
  return spec.transpose(eqn, ct, known, sink);
}

} // namespace linad
