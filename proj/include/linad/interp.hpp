#pragma once

#include <span>

#include "linad/ir.hpp"

namespace linad {

// Evaluates a program on the given inputs, one tensor per program input, in
// order. Equations run top to bottom; every intermediate is materialized.
// Throws std::invalid_argument on an input count/shape mismatch.
std::vector<Tensor> eval_program(const Program& prog, std::span<const Tensor> inputs);

// Evaluates a linear program on tangent (or cotangent) inputs. The inputs
// correspond to lp.linear_inputs, in order; for the programs produced by
// linearize and transpose_program those are all of lp.prog.inputs.
std::vector<Tensor> eval_linear(const LinearProgram& lp, std::span<const Tensor> inputs);

} // namespace linad
