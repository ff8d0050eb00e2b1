#include "linad/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "linad/check.hpp"
#include "linad/interp.hpp"
#include "linad/rules.hpp"
#include "linad/text.hpp"
#include "linad/transforms.hpp"

namespace linad {

namespace {

double max_abs(std::span<const Tensor> ts) {
  double m = 0.0;
  for (auto& t : ts) {
    m = std::max(m, t.max_abs());
  }
  return m;
}

// Per-output relative error of the linearized map against central
// differences: max |fd - ad| / (1 + |fd|_inf), maximized over outputs.
double fd_error(
    const Program& prog, std::span<const Tensor> x, std::span<const Tensor> v,
    const LinearProgram& lp) {
  double eps = 1e-6 * (1.0 + max_abs(x));
  std::vector<Tensor> fd = finite_diff_jvp(prog, x, v, eps);
  std::vector<Tensor> ad = eval_linear(lp, v);
  double worst = 0.0;
  for (size_t i = 0; i < fd.size(); ++i) {
    double num = 0.0;
    for (size_t j = 0; j < fd[i].data.size(); ++j) {
      num = std::max(num, std::abs(fd[i].data[j] - ad[i].data[j]));
    }
    worst = std::max(worst, num / (1.0 + fd[i].max_abs()));
  }
  return worst;
}

double max_elem_diff(const Tensor& a, const Tensor& b) {
  if (!(a.shape == b.shape)) {
    return std::numeric_limits<double>::infinity();
  }
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  }
  return m;
}

Tensor transposed(const Tensor& m) {
  auto rows = static_cast<size_t>(m.shape.dims[0]);
  auto cols = static_cast<size_t>(m.shape.dims[1]);
  Tensor out = Tensor::zeros(mat_shape(m.shape.dims[1], m.shape.dims[0]));
  for (size_t i = 0; i < rows; ++i) {
    for (size_t j = 0; j < cols; ++j) {
      out.data[j * rows + i] = m.data[i * cols + j];
    }
  }
  return out;
}

bool printable(const Program& p) {
  auto ok = [](const Atom& a) { return a.is_var() || a.lit().shape.count() > 0; };
  for (auto& eqn : p.eqns) {
    for (auto& a : eqn.inputs) {
      if (!ok(a)) {
        return false;
      }
    }
  }
  return std::all_of(p.outputs.begin(), p.outputs.end(), ok);
}

bool bitwise_equal(std::span<const Tensor> a, std::span<const Tensor> b) {
  if (a.size() != b.size()) {
    return false;
  }
  for (size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] == b[i])) {
      return false;
    }
  }
  return true;
}

struct Report {
  bool pass = true;
  std::ostringstream detail;

  void fail(const std::string& what) {
    pass = false;
    if (detail.tellp() > 0) {
      detail << "; ";
    }
    detail << what;
  }
};

void print_line(std::ostream& os, const char* name, const Report& r) {
  os << (r.pass ? "PASS" : "FAIL") << " " << name;
  auto d = r.detail.str();
  if (!d.empty()) {
    os << " (" << d << ")";
  }
  os << "\n";
}

Program unary_prog(Prim p, const Shape& s, Params params = {}) {
  ProgramBuilder b("p");
  Var x = b.add_input("x", s);
  Atom t = b.emit(p, {Atom(x)}, std::move(params));
  b.set_outputs({t});
  return b.take();
}

Program binary_prog(Prim p, const Shape& s0, const Shape& s1) {
  ProgramBuilder b("p");
  Var x = b.add_input("x", s0);
  Var y = b.add_input("y", s1);
  Atom t = b.emit(p, {Atom(x), Atom(y)});
  b.set_outputs({t});
  return b.take();
}

// -------------------------------------------------------------------------
// Section A: every primitive's JVP against finite differences, plus the
// bitwise agreement of the jvp program and its partially evaluated residual.

void check_prim_jvp(Report& r, const Program& prog, bool positive_x, std::mt19937_64& rng) {
  std::vector<Tensor> x = random_inputs(prog.inputs, rng);
  if (positive_x) {
    for (auto& t : x) {
      for (auto& v : t.data) {
        v = std::abs(v);
      }
    }
  }
  auto [y, lp] = linearize(prog, x);
  std::string label = prim_name(prog.eqns[0].prim);
  for (int d = 0; d < 3; ++d) {
    std::vector<Tensor> v = random_inputs(prog.inputs, rng);
    double err = fd_error(prog, x, v, lp);
    if (!(err <= 1e-5)) {
      r.fail(label + ": fd error " + std::to_string(err));
      return;
    }
    // The residual freezes the very tensors the jvp program would compute.
    Program jp = jvp_transform(prog);
    std::vector<Tensor> xv(x.begin(), x.end());
    xv.insert(xv.end(), v.begin(), v.end());
    std::vector<Tensor> full = eval_program(jp, xv);
    std::vector<Tensor> primal(full.begin(), full.begin() + std::ssize(y));
    std::vector<Tensor> tangent(full.begin() + std::ssize(y), full.end());
    if (!bitwise_equal(primal, y) || !bitwise_equal(tangent, eval_linear(lp, v))) {
      r.fail(label + ": jvp/residual mismatch");
      return;
    }
  }
}

void section_primitive_jvps(Report& r, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  auto vec3 = vec_shape(3);
  auto m23 = mat_shape(2, 3);
  check_prim_jvp(r, binary_prog(Prim::add, vec3, vec3), false, rng);
  check_prim_jvp(r, binary_prog(Prim::sub, vec3, vec3), false, rng);
  check_prim_jvp(r, unary_prog(Prim::neg, vec3), false, rng);
  check_prim_jvp(r, binary_prog(Prim::mul, vec3, vec3), false, rng);
  check_prim_jvp(r, binary_prog(Prim::mul, vec3, scalar_shape()), false, rng);
  check_prim_jvp(r, binary_prog(Prim::mul, scalar_shape(), vec3), false, rng);
  check_prim_jvp(r, binary_prog(Prim::div, vec3, vec3), false, rng);
  check_prim_jvp(r, binary_prog(Prim::div, vec3, scalar_shape()), false, rng);
  check_prim_jvp(r, unary_prog(Prim::sin, vec3), false, rng);
  check_prim_jvp(r, unary_prog(Prim::cos, scalar_shape()), false, rng);
  check_prim_jvp(r, unary_prog(Prim::exp, vec3), false, rng);
  check_prim_jvp(r, unary_prog(Prim::log, vec3), true, rng);
  check_prim_jvp(r, unary_prog(Prim::sum, vec3), false, rng);
  check_prim_jvp(r, unary_prog(Prim::sum, m23), false, rng);
  check_prim_jvp(r, unary_prog(Prim::broadcast, scalar_shape(), {{"n", 4}}), false, rng);
  check_prim_jvp(
      r, unary_prog(Prim::broadcast, scalar_shape(), {{"rows", 2}, {"cols", 2}}), false, rng);
  check_prim_jvp(r, binary_prog(Prim::dot, vec3, vec3), false, rng);
  check_prim_jvp(r, binary_prog(Prim::matvec, m23, vec3), false, rng);
  check_prim_jvp(r, binary_prog(Prim::outer, vec_shape(2), vec3), false, rng);
  check_prim_jvp(r, unary_prog(Prim::transpose2d, m23), false, rng);
  check_prim_jvp(r, unary_prog(Prim::slice, vec_shape(4), {{"start", 1}, {"stop", 3}}), false,
                 rng);
  check_prim_jvp(r, unary_prog(Prim::pad_zero, vec_shape(2), {{"start", 1}, {"total", 5}}),
                 false, rng);
  check_prim_jvp(r, binary_prog(Prim::concat, vec_shape(2), vec3), false, rng);
}

// -------------------------------------------------------------------------
// Section B: transposition of every linear primitive (and both coefficient
// positions of the bilinear ones) against the dot-product identity and the
// dense-matrix oracle. The deliberately-miscompiled canary build must fail
// here on sub.

void check_lp(Report& r, const std::string& label, const LinearProgram& lp, std::uint64_t seed) {
  double res = dot_product_check(lp, 20, seed);
  if (!(res <= 1e-9)) {
    r.fail(label + ": dot-product residual " + std::to_string(res));
    return;
  }
  Tensor d = dense_matrix_of_linear(lp);
  LinearProgram lpt = transpose_program(lp);
  double tdiff = max_elem_diff(dense_matrix_of_linear(lpt), transposed(d));
  if (!(tdiff <= 1e-12)) {
    r.fail(label + ": dense transpose off by " + std::to_string(tdiff));
    return;
  }
  double idiff = max_elem_diff(dense_matrix_of_linear(transpose_program(lpt)), d);
  if (!(idiff <= 1e-12)) {
    r.fail(label + ": involution off by " + std::to_string(idiff));
  }
}

LinearProgram lp_of(Program prog) {
  LinearProgram lp;
  lp.prog = std::move(prog);
  for (auto& in : lp.prog.inputs) {
    lp.linear_inputs.push_back(in.name);
  }
  return lp;
}

// One-equation linear program: out = prim(...), operands drawn from the
// linear inputs `ins` or literal coefficients.
LinearProgram one_eqn_lp(
    Prim p, const std::vector<Shape>& ins, std::vector<std::optional<Tensor>> coeffs,
    Params params = {}) {
  ProgramBuilder b("p");
  std::vector<Atom> atoms;
  size_t next_in = 0;
  for (auto& c : coeffs) {
    if (c) {
      atoms.push_back(Atom(*c));
    } else {
      atoms.push_back(Atom(b.add_input("a" + std::to_string(next_in), ins[next_in])));
      next_in++;
    }
  }
  Atom t = b.emit(p, std::move(atoms), std::move(params));
  b.set_outputs({t});
  return lp_of(b.take());
}

void section_primitive_transposes(Report& r, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xd1b54a32d192ed03ull);
  auto vec3 = vec_shape(3);
  auto lit = [&](const Shape& s) { return random_tensor(s, rng); };

  check_lp(r, "add", one_eqn_lp(Prim::add, {vec3, vec3}, {std::nullopt, std::nullopt}), seed);
  check_lp(r, "sub", one_eqn_lp(Prim::sub, {vec3, vec3}, {std::nullopt, std::nullopt}), seed);
  check_lp(r, "neg", one_eqn_lp(Prim::neg, {vec3}, {std::nullopt}), seed);
  check_lp(r, "mul.l", one_eqn_lp(Prim::mul, {vec3}, {std::nullopt, lit(vec3)}), seed);
  check_lp(r, "mul.r", one_eqn_lp(Prim::mul, {vec3}, {lit(vec3), std::nullopt}), seed);
  check_lp(
      r, "mul.sv", one_eqn_lp(Prim::mul, {scalar_shape()}, {std::nullopt, lit(vec3)}), seed);
  check_lp(
      r, "mul.vs", one_eqn_lp(Prim::mul, {vec3}, {std::nullopt, lit(scalar_shape())}), seed);
  check_lp(
      r, "div.s", one_eqn_lp(Prim::div, {vec3}, {std::nullopt, lit(scalar_shape())}), seed);
  check_lp(r, "div.v", one_eqn_lp(Prim::div, {vec3}, {std::nullopt, lit(vec3)}), seed);
  check_lp(r, "sum.v", one_eqn_lp(Prim::sum, {vec3}, {std::nullopt}), seed);
  check_lp(r, "sum.m", one_eqn_lp(Prim::sum, {mat_shape(2, 3)}, {std::nullopt}), seed);
  check_lp(
      r, "broadcast.v",
      one_eqn_lp(Prim::broadcast, {scalar_shape()}, {std::nullopt}, {{"n", 3}}), seed);
  check_lp(
      r, "broadcast.m",
      one_eqn_lp(Prim::broadcast, {scalar_shape()}, {std::nullopt}, {{"rows", 2}, {"cols", 2}}),
      seed);
  check_lp(r, "dot.l", one_eqn_lp(Prim::dot, {vec3}, {std::nullopt, lit(vec3)}), seed);
  check_lp(r, "dot.r", one_eqn_lp(Prim::dot, {vec3}, {lit(vec3), std::nullopt}), seed);
  check_lp(
      r, "matvec.m",
      one_eqn_lp(Prim::matvec, {mat_shape(2, 3)}, {std::nullopt, lit(vec3)}), seed);
  check_lp(
      r, "matvec.v",
      one_eqn_lp(Prim::matvec, {vec3}, {lit(mat_shape(2, 3)), std::nullopt}), seed);
  check_lp(
      r, "outer.l", one_eqn_lp(Prim::outer, {vec_shape(2)}, {std::nullopt, lit(vec3)}), seed);
  check_lp(
      r, "outer.r", one_eqn_lp(Prim::outer, {vec3}, {lit(vec_shape(2)), std::nullopt}), seed);
  check_lp(r, "transpose2d", one_eqn_lp(Prim::transpose2d, {mat_shape(2, 3)}, {std::nullopt}),
           seed);
  check_lp(
      r, "slice",
      one_eqn_lp(Prim::slice, {vec_shape(4)}, {std::nullopt}, {{"start", 1}, {"stop", 3}}),
      seed);
  check_lp(
      r, "pad_zero",
      one_eqn_lp(Prim::pad_zero, {vec_shape(2)}, {std::nullopt}, {{"start", 1}, {"total", 5}}),
      seed);
  check_lp(
      r, "concat", one_eqn_lp(Prim::concat, {vec_shape(2), vec3}, {std::nullopt, std::nullopt}),
      seed);

  // Fan-out: one input feeding two scaled paths; plus duplicated outputs.
  {
    ProgramBuilder b("p");
    Var a = b.add_input("a", vec3);
    Atom t0 = b.emit(Prim::mul, {Atom(a), Atom(Tensor::scalar(2.0))});
    Atom t1 = b.emit(Prim::mul, {Atom(a), Atom(Tensor::scalar(3.0))});
    Atom t2 = b.emit(Prim::add, {t0, t1});
    b.set_outputs({t2, t2});
    check_lp(r, "fanout", lp_of(b.take()), seed);
  }
  // Identity and zero-literal outputs.
  {
    ProgramBuilder b("p");
    Var a = b.add_input("a", vec3);
    b.set_outputs({Atom(a), Atom(Tensor::zeros(vec_shape(2)))});
    check_lp(r, "identity+zero", lp_of(b.take()), seed);
  }
}

// -------------------------------------------------------------------------
// Section C: corpus-wide invariants.

std::string check_corpus_entry(std::uint64_t seed) {
  GenConfig cfg;
  cfg.seed = seed;
  Program prog = generate_program(cfg);
  auto diags = validate(prog);
  if (!diags.empty()) {
    return "validate: " + format_diagnostics(diags);
  }
  if (printable(prog)) {
    Program reparsed = parse_program(print_program(prog));
    if (!(reparsed == prog)) {
      return "print/parse round-trip changed the program";
    }
  }

  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 1);
  std::vector<Tensor> x = random_inputs(prog.inputs, rng);
  auto [y, lp] = linearize(prog, x);
  if (!validate(lp.prog).empty()) {
    return "linearize output fails validate";
  }
  if (!check_linear(lp).empty()) {
    return "linearize output fails check_linear";
  }
  for (auto& eqn : lp.prog.eqns) {
    if (eqn.prim == Prim::sin || eqn.prim == Prim::cos || eqn.prim == Prim::exp ||
        eqn.prim == Prim::log) {
      return "nonlinear primitive staged into the residual";
    }
  }

  Program jp = jvp_transform(prog);
  if (!validate(jp).empty()) {
    return "jvp output fails validate";
  }
  for (int d = 0; d < 2; ++d) {
    std::vector<Tensor> v = random_inputs(prog.inputs, rng);
    double err = fd_error(prog, x, v, lp);
    if (!(err <= 1e-5)) {
      return "fd error " + std::to_string(err);
    }
    std::vector<Tensor> xv(x.begin(), x.end());
    xv.insert(xv.end(), v.begin(), v.end());
    std::vector<Tensor> full = eval_program(jp, xv);
    std::vector<Tensor> primal(full.begin(), full.begin() + std::ssize(y));
    std::vector<Tensor> tangent(full.begin() + std::ssize(y), full.end());
    if (!bitwise_equal(primal, y)) {
      return "jvp primal differs from eval";
    }
    if (!bitwise_equal(tangent, eval_linear(lp, v))) {
      return "residual differs from jvp tangent";
    }
  }

  LinearProgram lpt = transpose_program(lp);
  if (!validate(lpt.prog).empty()) {
    return "transpose output fails validate";
  }
  double res = dot_product_check(lp, 5, seed);
  if (!(res <= 1e-9)) {
    return "dot-product residual " + std::to_string(res);
  }
  Tensor d = dense_matrix_of_linear(lp);
  if (double t = max_elem_diff(dense_matrix_of_linear(lpt), transposed(d)); !(t <= 1e-12)) {
    return "dense transpose off by " + std::to_string(t);
  }
  if (double t = max_elem_diff(dense_matrix_of_linear(transpose_program(lpt)), d);
      !(t <= 1e-12)) {
    return "involution off by " + std::to_string(t);
  }

  std::vector<Tensor> ct;
  for (auto& a : prog.outputs) {
    ct.push_back(random_tensor(a.shape(), rng));
  }
  VjpResult vr = vjp(prog, x, ct);
  if (!bitwise_equal(vr.y, eval_program(prog, x))) {
    return "vjp primal not bitwise-equal to eval";
  }

  Tensor jf = jacobian_via_jvp(prog, x);
  Tensor jr = jacobian_via_vjp(prog, x);
  double tol = 1e-10 * (1.0 + jf.max_abs());
  if (double t = max_elem_diff(jf, jr); !(t <= tol)) {
    return "jacobian modes differ by " + std::to_string(t);
  }
  return "";
}

void section_corpus(Report& r, const SelftestOptions& opts) {
  std::vector<std::string> results(static_cast<size_t>(opts.corpus));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < opts.corpus; ++i) {
    try {
      results[static_cast<size_t>(i)] = check_corpus_entry(opts.seed + static_cast<std::uint64_t>(i));
    } catch (const std::exception& e) {
      results[static_cast<size_t>(i)] = std::string("exception: ") + e.what();
    }
  }
  int bad = 0;
  for (int i = 0; i < opts.corpus; ++i) {
    if (!results[static_cast<size_t>(i)].empty()) {
      if (bad < 5) {
        r.fail("seed " + std::to_string(opts.seed + static_cast<std::uint64_t>(i)) + ": " +
               results[static_cast<size_t>(i)]);
      }
      bad++;
    }
  }
  if (bad == 0) {
    r.detail << opts.corpus << "/" << opts.corpus << " programs clean";
  } else if (bad > 5) {
    r.detail << "... " << bad << " failures total";
  }
}

} // namespace

int run_selftest(const SelftestOptions& opts, std::ostream& os) {
  bool all_pass = true;

  Report a;
  section_primitive_jvps(a, opts.seed);
  print_line(os, "primitive jvp rules vs finite differences", a);
  all_pass &= a.pass;

  Report b;
  section_primitive_transposes(b, opts.seed);
  print_line(os, "primitive transpose rules vs dense/dot-product oracles", b);
  all_pass &= b.pass;

  Report c;
  section_corpus(c, opts);
  print_line(os, "random-corpus invariants", c);
  all_pass &= c.pass;

  int jvp_rules = 0, transpose_rules = 0;
  for (auto& spec : primitive_table()) {
    jvp_rules += spec.jvp != nullptr;
    transpose_rules += spec.transpose != nullptr;
  }
  os << "INFO transpose rules: " << transpose_rules << " of " << jvp_rules
     << " jvp rules (ratio " << static_cast<double>(transpose_rules) / jvp_rules
     << "; registry-dependent)\n";

  os << (all_pass ? "selftest: all sections passed\n" : "selftest: FAILURES\n");
  return all_pass ? 0 : 1;
}

} // namespace linad
