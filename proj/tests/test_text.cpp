#include <doctest.h>

#include <cmath>

#include "linad/text.hpp"
#include "test_util.hpp"

using namespace linad;
using namespace testutil;

TEST_SUITE("text") {

TEST_CASE("parse a minimal program") {
  Program p = parse_program(
      "fn f(x: f64[3]) -> f64\n"
      "  t = dot x, x\n"
      "  return t\n");
  CHECK(p.name == "f");
  REQUIRE(p.inputs.size() == 1);
  CHECK(p.inputs[0].name == "x");
  CHECK(p.inputs[0].shape == vec_shape(3));
  REQUIRE(p.eqns.size() == 1);
  CHECK(p.eqns[0].prim == Prim::dot);
  CHECK(p.eqns[0].out.shape == scalar_shape());
  REQUIRE(p.outputs.size() == 1);
  CHECK(p.outputs[0].var().name == "t");
  CHECK(validate(p).empty());
}

TEST_CASE("print emits the canonical form") {
  Program p = one_eqn(Prim::slice, { vec_shape(4) }, { { "start", 1 }, { "stop", 3 } });
  CHECK(print_program(p) ==
        "fn t(x0: f64[4]) -> f64[2]\n"
        "  y = slice x0 {start=1, stop=3}\n"
        "  return y\n");
}

TEST_CASE("round trip is structural identity") {
  Program p;
  p.name = "g";
  Var x{ "x", vec_shape(2) };
  Var m{ "m", mat_shape(2, 2) };
  p.inputs = { x, m };
  Var t0{ "t0", vec_shape(2) };
  Var t1{ "t1", scalar_shape() };
  p.eqns.push_back(Equation{ t0, Prim::matvec, { Atom(m), Atom(x) }, {} });
  p.eqns.push_back(Equation{ t1, Prim::dot, { Atom(t0), Atom(vec({ -0.5, 1e-17 })) }, {} });
  p.outputs = { Atom(t1), Atom(t1), Atom(sc(2.0)) };
  Program q = parse_program(print_program(p));
  CHECK(q == p);
  CHECK(print_program(q) == print_program(p));
}

TEST_CASE("floats print in shortest round-trip form") {
  CHECK(print_tensor(sc(2.0)) == "2");
  CHECK(print_tensor(sc(0.5)) == "0.5");
  CHECK(print_tensor(sc(-0.0)) == "-0");
  CHECK(print_tensor(vec({ 1.0, 2.25 })) == "[1, 2.25]");
  CHECK(print_tensor(mat(2, 2, { 1, 0, 0, 1 })) == "[[1, 0], [0, 1]]");
  double third = 1.0 / 3.0;
  CHECK(parse_tensor(print_tensor(sc(third))) == sc(third));
}

TEST_CASE("special values round trip") {
  double inf = std::numeric_limits<double>::infinity();
  CHECK(parse_tensor(print_tensor(sc(inf))) == sc(inf));
  CHECK(parse_tensor(print_tensor(sc(-inf))) == sc(-inf));
  Tensor qnan = sc(std::nan(""));
  CHECK(parse_tensor(print_tensor(qnan)) == qnan);
}

TEST_CASE("hex float input is accepted") {
  CHECK(parse_tensor("0x1.8p1") == sc(3.0));
  CHECK(parse_tensor("-0x1p-1") == sc(-0.5));
}

TEST_CASE("comments and blank lines are ignored") {
  Program p = parse_program(
      "# leading comment\n"
      "fn f(x: f64) -> f64   # trailing\n"
      "\n"
      "  t = neg x\n"
      "  # a comment line\n"
      "  return t\n");
  CHECK(p.eqns.size() == 1);
}

TEST_CASE("zero-element literals have no text form") {
  Program p = one_eqn(Prim::sum, { vec_shape(0) });
  p.eqns[0].inputs[0] = Atom(Tensor::zeros(vec_shape(0)));
  p.inputs.clear();
  CHECK_THROWS_AS(print_program(p), std::invalid_argument);
  CHECK_THROWS_AS(print_tensor(Tensor::zeros(mat_shape(0, 3))), std::invalid_argument);
}

TEST_CASE("parse errors carry positions") {
  auto pos = [](const char* text) {
    try {
      parse_program(text);
    } catch (const ParseError& e) {
      return std::pair{ e.line(), e.col() };
    }
    return std::pair{ -1, -1 };
  };

  // Unknown primitive.
  CHECK(pos("fn f(x: f64) -> f64\n  t = tanh x\n  return t\n") == std::pair{ 2, 7 });
  // Undefined variable.
  CHECK(pos("fn f(x: f64) -> f64\n  t = neg zz\n  return t\n") == std::pair{ 2, 11 });
  // Redefinition.
  CHECK(pos("fn f(x: f64) -> f64\n  x = neg x\n  return x\n").first == 2);
  // Missing return.
  CHECK(pos("fn f(x: f64) -> f64\n  t = neg x\n").first > 0);
  // Shape rule violation is positioned at the equation.
  CHECK(pos("fn f(x: f64[2], y: f64[3]) -> f64[2]\n  t = add x, y\n  return t\n").first == 2);
  // Signature/return mismatch.
  CHECK(pos("fn f(x: f64) -> f64, f64\n  t = neg x\n  return t\n") == std::pair{ 1, 1 });
  // Declared output type must match the returned atom.
  CHECK(pos("fn f(x: f64[2]) -> f64\n  t = neg x\n  return t\n") == std::pair{ 1, 1 });
  // Unexpected text after return.
  CHECK(pos("fn f(x: f64) -> f64\n  return x\n  t = neg x\n").first == 3);
}

TEST_CASE("what() includes the position") {
  try {
    parse_program("fn f() -> f64\n  return q\n");
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("matrix literal rows must agree") {
  CHECK_THROWS_AS(parse_tensor("[[1, 2], [3]]"), ParseError);
}

TEST_CASE("parse_tensor rejects trailing input") {
  CHECK_THROWS_AS(parse_tensor("1 2"), ParseError);
  CHECK_THROWS_AS(parse_tensor(""), ParseError);
}

TEST_CASE("parse_tensor_list splits a sequence") {
  auto ts = parse_tensor_list("[1, 2] 0.5 [[1, 0], [0, 1]]");
  REQUIRE(ts.size() == 3);
  CHECK(ts[0] == vec({ 1, 2 }));
  CHECK(ts[1] == sc(0.5));
  CHECK(ts[2] == mat(2, 2, { 1, 0, 0, 1 }));
  CHECK(parse_tensor_list("").empty());
  // Shell-split fragments joined back together still parse.
  CHECK(parse_tensor_list("[1, 2 ] [ 3, 4]").size() == 2);
}

TEST_CASE("literal operands and params round trip") {
  Program p = parse_program(
      "fn f(x: f64[2]) -> f64[4]\n"
      "  t = pad_zero x {start=1, total=4}\n"
      "  u = add t, [0.25, 0, 0, -0]\n"
      "  return u\n");
  CHECK(p.eqns[0].params == Params{ { "start", 1 }, { "total", 4 } });
  CHECK(p.eqns[1].inputs[1].lit() == vec({ 0.25, 0.0, 0.0, -0.0 }));
  CHECK(parse_program(print_program(p)) == p);
}

TEST_CASE("duplicate outputs round trip") {
  Program p = parse_program(
      "fn f(x: f64) -> f64, f64\n"
      "  t = neg x\n"
      "  return t, t\n");
  REQUIRE(p.outputs.size() == 2);
  CHECK(parse_program(print_program(p)) == p);
}

} // TEST_SUITE("text")
