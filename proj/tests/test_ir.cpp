#include <doctest.h>

#include <cmath>

#include "linad/ir.hpp"
#include "test_util.hpp"

using namespace linad;
using namespace testutil;

TEST_SUITE("ir") {

TEST_CASE("shape rank, count and spelling") {
  CHECK(scalar_shape().rank() == 0);
  CHECK(scalar_shape().count() == 1);
  CHECK(scalar_shape().str() == "f64");
  CHECK(vec_shape(3).rank() == 1);
  CHECK(vec_shape(3).count() == 3);
  CHECK(vec_shape(3).str() == "f64[3]");
  CHECK(mat_shape(2, 3).count() == 6);
  CHECK(mat_shape(2, 3).str() == "f64[2,3]");
  CHECK(vec_shape(0).count() == 0);
  CHECK(mat_shape(0, 4).count() == 0);
}

TEST_CASE("tensor constructors check data length") {
  CHECK_NOTHROW(Tensor(vec_shape(2), { 1.0, 2.0 }));
  CHECK_THROWS_AS(Tensor(vec_shape(2), { 1.0 }), std::invalid_argument);
  CHECK(Tensor::zeros(mat_shape(2, 2)).data.size() == 4);
  CHECK(Tensor::scalar(4.0).shape.rank() == 0);
}

TEST_CASE("tensor equality is bitwise") {
  CHECK(sc(1.5) == sc(1.5));
  CHECK(sc(0.0) != sc(-0.0));
  double qnan = std::nan("");
  CHECK(sc(qnan) == sc(qnan));
  CHECK(vec({ 1.0 }) != sc(1.0));
}

TEST_CASE("is_zero treats both signed zeros as zero") {
  CHECK(Tensor::zeros(vec_shape(3)).is_zero());
  CHECK(vec({ 0.0, -0.0 }).is_zero());
  CHECK_FALSE(vec({ 0.0, 1e-300 }).is_zero());
}

TEST_CASE("prim names round trip") {
  for (int i = static_cast<int>(Prim::add); i <= static_cast<int>(Prim::concat); ++i) {
    auto p = static_cast<Prim>(i);
    auto back = prim_from_name(prim_name(p));
    REQUIRE(back.has_value());
    CHECK(*back == p);
  }
  CHECK_FALSE(prim_from_name("tanh").has_value());
  CHECK_FALSE(prim_from_name("").has_value());
}

TEST_CASE("params lookup") {
  Params ps{ { "start", 1 }, { "stop", 3 } };
  CHECK(get_param(ps, "start") == 1);
  CHECK(get_param(ps, "stop") == 3);
  CHECK_THROWS_AS(get_param(ps, "total"), std::invalid_argument);
  CHECK(find_param(ps, "missing") == std::nullopt);
  CHECK(find_param(ps, "stop") == 3);
}

TEST_CASE("validate accepts a clean program") {
  Program p = one_eqn(Prim::dot, { vec_shape(3), vec_shape(3) });
  CHECK(validate(p).empty());
}

TEST_CASE("validate accepts duplicate and literal outputs") {
  Program p = one_eqn(Prim::neg, { vec_shape(2) });
  p.outputs.push_back(p.outputs[0]);
  p.outputs.emplace_back(sc(7.0));
  CHECK(validate(p).empty());
}

TEST_CASE("validate rejects rebinding a name") {
  Program p = one_eqn(Prim::neg, { vec_shape(2) });
  p.eqns.push_back(p.eqns[0]);
  auto diags = validate(p);
  REQUIRE_FALSE(diags.empty());
  CHECK(diags[0].eqn == 1);
  CHECK(format_diagnostics(diags).find("redefinition") != std::string::npos);
}

TEST_CASE("validate rejects rebinding an input") {
  Program p = one_eqn(Prim::neg, { vec_shape(2) });
  p.eqns[0].out = Var{ "x0", vec_shape(2) };
  p.outputs = { Atom(p.eqns[0].out) };
  CHECK_FALSE(validate(p).empty());
}

TEST_CASE("validate rejects use before definition") {
  Program p = one_eqn(Prim::neg, { vec_shape(2) });
  p.eqns[0].inputs = { Atom(Var{ "ghost", vec_shape(2) }) };
  auto diags = validate(p);
  REQUIRE_FALSE(diags.empty());
  CHECK(format_diagnostics(diags).find("ghost") != std::string::npos);
}

TEST_CASE("validate rejects undefined outputs") {
  Program p = one_eqn(Prim::neg, { vec_shape(2) });
  p.outputs = { Atom(Var{ "ghost", vec_shape(2) }) };
  CHECK_FALSE(validate(p).empty());
}

TEST_CASE("validate rejects arity and shape violations") {
  Program p = one_eqn(Prim::add, { vec_shape(2), vec_shape(2) });
  p.eqns[0].inputs.pop_back();
  CHECK_FALSE(validate(p).empty());

  Program q = one_eqn(Prim::add, { vec_shape(2), vec_shape(2) });
  q.inputs[1].shape = vec_shape(3);
  q.eqns[0].inputs[1] = Atom(q.inputs[1]);
  CHECK_FALSE(validate(q).empty());
}

TEST_CASE("validate rejects a wrong output-shape annotation") {
  Program p = one_eqn(Prim::dot, { vec_shape(2), vec_shape(2) });
  p.eqns[0].out.shape = vec_shape(2);
  p.outputs = { Atom(p.eqns[0].out) };
  CHECK_FALSE(validate(p).empty());
}

LinearProgram lp_of(Program p, std::vector<std::string> linear) {
  return LinearProgram{ std::move(p), std::move(linear) };
}

TEST_CASE("check_linear accepts linear one-equation programs") {
  CHECK(check_linear(lp_of(one_eqn(Prim::add, { vec_shape(2), vec_shape(2) }), { "x0", "x1" }))
            .empty());
  CHECK(check_linear(lp_of(one_eqn(Prim::neg, { vec_shape(2) }), { "x0" })).empty());
  CHECK(check_linear(lp_of(one_eqn(Prim::sum, { vec_shape(3) }), { "x0" })).empty());
  CHECK(check_linear(
            lp_of(one_eqn(Prim::slice, { vec_shape(4) }, { { "start", 1 }, { "stop", 3 } }),
                  { "x0" }))
            .empty());
}

TEST_CASE("check_linear accepts one linear operand of a bilinear primitive") {
  // x0 known (not listed), x1 linear.
  Program p = one_eqn(Prim::mul, { vec_shape(2), vec_shape(2) });
  CHECK(check_linear(lp_of(p, { "x1" })).empty());
  CHECK(check_linear(lp_of(p, { "x0" })).empty());
}

TEST_CASE("check_linear rejects two linear operands of a bilinear primitive") {
  Program p = one_eqn(Prim::mul, { vec_shape(2), vec_shape(2) });
  auto diags = check_linear(lp_of(p, { "x0", "x1" }));
  REQUIRE_FALSE(diags.empty());
  CHECK(diags[0].eqn == 0);
}

TEST_CASE("check_linear rejects a linear divisor") {
  Program p = one_eqn(Prim::div, { vec_shape(2), scalar_shape() });
  CHECK(check_linear(lp_of(p, { "x0" })).empty());
  CHECK_FALSE(check_linear(lp_of(p, { "x1" })).empty());
}

TEST_CASE("check_linear rejects nonlinear primitives on linear values") {
  for (Prim prim : { Prim::sin, Prim::cos, Prim::exp, Prim::log }) {
    Program p = one_eqn(prim, { vec_shape(2) });
    CHECK_FALSE(check_linear(lp_of(p, { "x0" })).empty());
    // With no linear inputs the output is a known variable, also rejected.
    CHECK_FALSE(check_linear(lp_of(p, {})).empty());
  }
}

TEST_CASE("check_linear rejects affine shifts") {
  // add(x, 1.0) is affine, not linear.
  Program p = one_eqn(Prim::add, { vec_shape(2), vec_shape(2) });
  p.eqns[0].inputs[1] = Atom(vec({ 1.0, 0.0 }));
  p.inputs.pop_back();
  CHECK_FALSE(check_linear(lp_of(p, { "x0" })).empty());

  // add(x, 0.0) keeps the map linear.
  p.eqns[0].inputs[1] = Atom(vec({ 0.0, 0.0 }));
  CHECK(check_linear(lp_of(p, { "x0" })).empty());
}

TEST_CASE("check_linear accepts zero-literal outputs and rejects other known outputs") {
  Program p = one_eqn(Prim::neg, { vec_shape(2) });
  p.outputs.emplace_back(Tensor::zeros(vec_shape(3)));
  CHECK(check_linear(lp_of(p, { "x0" })).empty());
  p.outputs.emplace_back(sc(2.0));
  CHECK_FALSE(check_linear(lp_of(p, { "x0" })).empty());
}

TEST_CASE("analyze_linearity classifies variables") {
  // y0 = mul x0, x1 with x1 linear: y0 linear. y1 = sum x0: known.
  Program p;
  p.inputs = { Var{ "x0", vec_shape(2) }, Var{ "x1", vec_shape(2) } };
  Var y0{ "y0", vec_shape(2) };
  Var y1{ "y1", scalar_shape() };
  p.eqns.push_back(Equation{ y0, Prim::mul, { Atom(p.inputs[0]), Atom(p.inputs[1]) }, {} });
  p.eqns.push_back(Equation{ y1, Prim::sum, { Atom(p.inputs[0]) }, {} });
  p.outputs = { Atom(y0) };
  auto info = analyze_linearity(LinearProgram{ p, { "x1" } });
  CHECK(info.diags.empty());
  CHECK(info.is_linear("x1"));
  CHECK(info.is_linear("y0"));
  CHECK_FALSE(info.is_linear("x0"));
  CHECK_FALSE(info.is_linear("y1"));
}

TEST_CASE("check_linear rejects unknown linear-input names") {
  Program p = one_eqn(Prim::neg, { vec_shape(2) });
  CHECK_FALSE(check_linear(lp_of(p, { "nope" })).empty());
}

} // TEST_SUITE("ir")
