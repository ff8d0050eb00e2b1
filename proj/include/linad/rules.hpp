#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "linad/ir.hpp"

namespace linad {

enum class Linearity {
  linear,             // linear in every operand jointly (add, slice, ...)
  linear_per_operand, // bilinear: linear in each operand alone (mul, dot, ...)
  linear_in_position, // linear only in flagged positions (div numerator)
  nonlinear,          // sin, cos, exp, log
};

// Collects equations for a program under construction and keeps names unique.
// One builder per transform invocation; not shared across threads.
class ProgramBuilder {
 public:
  explicit ProgramBuilder(std::string name);

  Var add_input(const std::string& hint, const Shape& shape);
  // Adds an input keeping its exact name (for source vars carried into the
  // new program; references to them must stay valid).
  void add_input_verbatim(const Var& v);
  // Marks a name as taken so fresh_name avoids it. Used when a transform will
  // later append source equations verbatim; the caller keeps SSA discipline.
  void reserve(const std::string& name);
  // Appends an equation verbatim and claims its out name.
  void append(Equation eqn);
  // Infers the output shape, binds a fresh variable and appends the equation.
  Atom emit(Prim prim, std::vector<Atom> inputs, Params params = {},
            const std::string& hint = "t");
  void set_outputs(std::vector<Atom> outputs);

  std::string fresh_name(const std::string& hint);
  const Program& program() const {
    return prog_;
  }
  Program take() {
    return std::move(prog_);
  }

 private:
  Program prog_;
  std::unordered_set<std::string> used_;
};

// Absent tangent = symbolic zero; materialized only at program boundaries.
using TangentAtom = std::optional<Atom>;

struct PrimitiveSpec {
  Prim prim;
  const char* name;
  int arity;
  Linearity linearity;
  std::uint8_t linear_positions; // bitmask, meaningful for the positional classes
  Shape (*shape)(std::span<const Shape>, const Params&);
  Tensor (*eval)(std::span<const Tensor>, const Params&);
  TangentAtom (*jvp)(const Equation&, std::span<const TangentAtom>, ProgramBuilder&);
  // Present exactly for the non-nonlinear primitives.
  std::vector<std::optional<Atom>> (*transpose)(
      const Equation&, const Atom&, std::span<const std::optional<Atom>>, ProgramBuilder&);
};

std::span<const PrimitiveSpec> primitive_table();
const PrimitiveSpec& prim_spec(Prim p);

Shape infer_shape(Prim p, std::span<const Shape> ins, const Params& params);
Tensor eval_prim(Prim p, std::span<const Tensor> ins, const Params& params);

// Emits the tangent computation for one source equation into `sink`,
// referencing the equation's primal inputs and output as needed, and returns
// the output tangent (symbolic zero when every contributing tangent is zero).
TangentAtom apply_jvp_rule(
    const Equation& eqn, std::span<const TangentAtom> tangents, ProgramBuilder& sink);

// Emits the cotangent contributions of one linear equation into `sink`.
// known[i] holds the operand's value as an atom of the output program when
// the operand is known, and is disengaged for the operand(s) receiving a
// cotangent. Returns one contribution per input, NoContribution (= nullopt)
// for known ones.
std::vector<std::optional<Atom>> apply_transpose_rule(
    const Equation& eqn, const Atom& ct, std::span<const std::optional<Atom>> known,
    ProgramBuilder& sink);

} // namespace linad
