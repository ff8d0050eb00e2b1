#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

namespace linad {

// Dense row-major f64 tensors of rank 0, 1 or 2 are the only runtime value.
struct Shape {
  std::vector<std::int64_t> dims;

  int rank() const {
    return static_cast<int>(dims.size());
  }
  std::int64_t count() const {
    std::int64_t n = 1;
    for (auto d : dims) {
      n *= d;
    }
    return n;
  }
  // Type syntax used by the text format: "f64", "f64[3]", "f64[2,3]".
  std::string str() const;

  bool operator==(const Shape& other) const = default;
};

inline Shape scalar_shape() {
  return Shape{};
}
inline Shape vec_shape(std::int64_t n) {
  return Shape{{n}};
}
inline Shape mat_shape(std::int64_t r, std::int64_t c) {
  return Shape{{r, c}};
}

struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> d);
  static Tensor zeros(const Shape& s);
  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> d);
  static Tensor mat(std::int64_t r, std::int64_t c, std::vector<double> d);

  bool is_zero() const; // every entry is (+/-) 0.0
  double max_abs() const;
};

// Bitwise on data, so -0.0 != 0.0 and evaluation reproducibility is testable.
bool operator==(const Tensor& a, const Tensor& b);
inline bool operator!=(const Tensor& a, const Tensor& b) {
  return !(a == b);
}

// A variable is named once per program; the shape is fixed at binding.
struct Var {
  std::string name;
  Shape shape;

  bool operator==(const Var& other) const = default;
};

// Either a reference to an in-scope Var or an inline literal tensor.
struct Atom {
  std::variant<Var, Tensor> value;

  Atom(Var v) : value(std::move(v)) {}
  Atom(Tensor t) : value(std::move(t)) {}

  bool is_var() const {
    return std::holds_alternative<Var>(value);
  }
  bool is_lit() const {
    return std::holds_alternative<Tensor>(value);
  }
  const Var& var() const {
    return std::get<Var>(value);
  }
  const Tensor& lit() const {
    return std::get<Tensor>(value);
  }
  const Shape& shape() const {
    return is_var() ? var().shape : lit().shape;
  }
};

bool operator==(const Atom& a, const Atom& b);

// Primitive tags. The registry (shape rules, semantics, linearity, jvp and
// transpose rules) lives in rules.hpp; the tag is shared vocabulary.
enum class Prim {
  add,
  sub,
  neg,
  mul,
  div,
  sin,
  cos,
  exp,
  log,
  sum,
  broadcast,
  dot,
  matvec,
  outer,
  transpose2d,
  slice,
  pad_zero,
  concat,
};

const char* prim_name(Prim p);
std::optional<Prim> prim_from_name(const std::string& name);

// Static parameters (slice bounds, broadcast target shape, ...) in canonical
// per-primitive order.
using Params = std::vector<std::pair<std::string, std::int64_t>>;

std::int64_t get_param(const Params& params, const std::string& name);
std::optional<std::int64_t> find_param(const Params& params, const std::string& name);

struct Equation {
  Var out;
  Prim prim;
  std::vector<Atom> inputs;
  Params params;
};

bool operator==(const Equation& a, const Equation& b);

// A straight-line SSA/ANF trace: inputs, equations in dependency order,
// output atoms.
struct Program {
  std::string name = "f";
  std::vector<Var> inputs;
  std::vector<Equation> eqns;
  std::vector<Atom> outputs;
};

bool operator==(const Program& a, const Program& b);

// A program together with the subset of its inputs (by name, in input order)
// that it is structurally linear in. check_linear makes the claim checkable.
struct LinearProgram {
  Program prog;
  std::vector<std::string> linear_inputs;
};

using Env = std::unordered_map<std::string, Tensor>;

struct Diagnostic {
  std::string message;
  int eqn = -1; // index into prog.eqns, -1 for program-level
};

std::string format_diagnostics(const std::vector<Diagnostic>& diags);

// Well-formedness: SSA (each name bound once), definition-before-use, arity
// and shape rules per primitive, output atoms defined. Empty result means
// the program is clean.
std::vector<Diagnostic> validate(const Program& prog);

// Forward dataflow classification of each variable as linear-dependent or
// known, produced by the same pass that backs check_linear.
struct LinearityInfo {
  std::unordered_map<std::string, bool> linear; // name -> linear-dependent
  std::vector<Diagnostic> diags;

  bool is_linear(const std::string& name) const {
    auto it = linear.find(name);
    return it != linear.end() && it->second;
  }
};

LinearityInfo analyze_linearity(const LinearProgram& lp);

// Structural linearity check. A variable is linear-dependent if it reaches
// a linear input; the pass rejects (i) nonlinear primitives applied to a
// linear-dependent value, (ii) two linear-dependent operands of a bilinear
// primitive, (iii) a linear-dependent divisor, (iv) a known operand of a
// fully linear primitive that is not an all-zero literal (which would make
// the map affine), and (v) outputs that are neither linear-dependent nor
// all-zero literals.
std::vector<Diagnostic> check_linear(const LinearProgram& lp);

} // namespace linad
