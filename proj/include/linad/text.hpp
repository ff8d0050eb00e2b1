#pragma once

#include <stdexcept>
#include <string>

#include "linad/ir.hpp"

namespace linad {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error(
            "line " + std::to_string(line) + ", col " + std::to_string(col) + ": " + msg),
        line_(line),
        col_(col) {}

  int line() const {
    return line_;
  }
  int col() const {
    return col_;
  }

 private:
  int line_;
  int col_;
};

// Parses the textual program format:
//
//   fn NAME(x: f64[2], s: f64) -> f64
//     t0 = dot x, x
//     t1 = mul t0, s
//     return t1
//
// Equations are newline-terminated; `#` comments to end of line; equation
// parameters follow the operands as `{start=0, stop=2}`. Tensor literals are
// inline: scalars `1.5`, vectors `[1, 2]`, matrices `[[1, 2], [3, 4]]`.
// Throws ParseError with position on malformed input.
Program parse_program(const std::string& text);

// Canonical form of a program; parse_program(print_program(p)) == p
// structurally, with literal tensors bit-equal (floats are printed in
// shortest-round-trip form, and hex floats are accepted on input). Tensor
// literals with zero elements have no spelling in the grammar; printing one
// throws std::invalid_argument.
std::string print_program(const Program& prog);

// One tensor in the literal syntax above (used for CLI arguments).
Tensor parse_tensor(const std::string& text);
std::string print_tensor(const Tensor& t);

// Whitespace-separated sequence of tensor literals, e.g. "[1,2] 0.5 [[1,0],[0,1]]".
std::vector<Tensor> parse_tensor_list(const std::string& text);

} // namespace linad
