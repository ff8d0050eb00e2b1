#pragma once

#include <span>
#include <unordered_map>
#include <utility>
#include <variant>

#include "linad/ir.hpp"

namespace linad {

// Forward-mode derivative. The result takes prog's inputs followed by one
// tangent input per primal input (same shapes) and returns prog's outputs
// followed by one tangent per output. Each source equation is emitted
// verbatim, then its tangent equations; symbolic-zero tangents surface as
// zero literals only in the output list.
Program jvp_transform(const Program& prog);

// A value during partial evaluation: a concrete tensor, or a variable of the
// staged program.
using PartialValue = std::variant<Tensor, Var>;

inline bool is_known(const PartialValue& v) {
  return std::holds_alternative<Tensor>(v);
}

struct PartialEvalResult {
  std::vector<PartialValue> outputs; // one per source output
  Program staged;                    // residual program over the unknown inputs
};

// Splits prog along known/unknown inputs. An equation whose inputs are all
// known is evaluated immediately; anything else is staged, with known
// operands frozen as literal atoms. The staged program's inputs are exactly
// the unknown source inputs (in order) and its outputs the unknown outputs.
// known_vals carries one tensor per flagged input, in input order.
PartialEvalResult partial_eval(
    const Program& prog, const std::vector<bool>& known, std::span<const Tensor> known_vals);

// jvp_transform followed by partial_eval with the primal inputs known. Returns
// the primal outputs and the residual tangent map as a LinearProgram taking
// one tangent per primal input to one tangent per primal output. The residual
// is structurally linear by construction; a check_linear diagnostic here is an
// internal error and throws std::logic_error.
std::pair<std::vector<Tensor>, LinearProgram> linearize(
    const Program& prog, std::span<const Tensor> x);

// Cotangent accumulator keyed by variable name; an absent key is a symbolic
// zero. Entries are atoms of the program under construction.
using CotangentMap = std::unordered_map<std::string, Atom>;

// Transposes a structurally linear program: the result takes one cotangent
// per lp output and returns one cotangent per lp linear input. Known
// subcomputations are pre-evaluated and frozen as literals. Cotangents
// accumulate in a fixed order (reverse equation order, input-position order
// within an equation); absent cotangents stay symbolic and materialize as
// zero literals only in the output list.
LinearProgram transpose_program(const LinearProgram& lp);

struct VjpResult {
  std::vector<Tensor> y;
  std::vector<Tensor> x_ct;
};

// Reverse-mode derivative as the composition: linearize, transpose the
// residual, apply it to the output cotangents.
VjpResult vjp(const Program& prog, std::span<const Tensor> x, std::span<const Tensor> ct);

// Gradient of a program with exactly one scalar output: vjp at cotangent 1.
std::vector<Tensor> grad(const Program& prog, std::span<const Tensor> x);

} // namespace linad
