#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "linad/ir.hpp"

namespace linad {

// Random well-formed program generator. Deterministic in seed. Values are
// kept in tame ranges so the finite-difference and dense oracles stay well
// conditioned: literals and test points have magnitude in [min_mag, max_mag]
// (random sign), divisor and log arguments are restricted to exp outputs or
// safe literals, and any equation whose magnitude estimate exceeds mag_cap
// is redrawn.
struct GenConfig {
  std::uint64_t seed = 0;
  int max_eqns = 12;
  std::int64_t max_dim = 4;
  int min_inputs = 1;
  int max_inputs = 3;
  std::vector<Prim> prims; // empty = the full registry
  double min_mag = 0.2;
  double max_mag = 2.0;
  double mag_cap = 100.0;
};

Program generate_program(const GenConfig& cfg);

// Shared deterministic draws. std::uniform_real_distribution is
// implementation-defined; this is not.
double uniform01(std::mt19937_64& rng);
std::int64_t rand_range(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi);

// Tensor with elementwise random sign and magnitude in [min_mag, max_mag].
Tensor random_tensor(
    const Shape& shape, std::mt19937_64& rng, double min_mag = 0.2, double max_mag = 2.0);

// One tensor per var, via random_tensor.
std::vector<Tensor> random_inputs(
    std::span<const Var> vars, std::mt19937_64& rng, double min_mag = 0.2, double max_mag = 2.0);

// Concatenation of all entries in order.
std::vector<double> flatten(std::span<const Tensor> ts);

// Central-difference directional derivative: (f(x+eps*v) - f(x-eps*v)) / (2*eps).
std::vector<Tensor> finite_diff_jvp(
    const Program& prog, std::span<const Tensor> x, std::span<const Tensor> v, double eps);

// The linear map as a dense matrix: rows = flattened output size, cols =
// flattened linear-input size; column j is eval_linear over basis vector e_j.
Tensor dense_matrix_of_linear(const LinearProgram& lp);

// Max over `trials` random (v, w) pairs of
// |<lp(v), w> - <v, transpose(lp)(w)>| / (1 + |<lp(v), w>|).
double dot_product_check(const LinearProgram& lp, int trials, std::uint64_t seed);

// Dense Jacobian at x, assembled column-by-column from the linearized
// program, or row-by-row from vjp over output basis cotangents.
Tensor jacobian_via_jvp(const Program& prog, std::span<const Tensor> x);
Tensor jacobian_via_vjp(const Program& prog, std::span<const Tensor> x);

} // namespace linad
