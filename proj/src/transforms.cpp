#include "linad/transforms.hpp"

#include <optional>
#include <stdexcept>

#include "linad/interp.hpp"
#include "linad/rules.hpp"

namespace linad {

namespace {

void require_valid(const Program& prog, const char* who) {
  auto diags = validate(prog);
  if (!diags.empty()) {
    throw std::invalid_argument(
        std::string(who) + ": invalid program\n" + format_diagnostics(diags));
  }
}

} // namespace

Program jvp_transform(const Program& prog) {
  require_valid(prog, "[jvp]");
  ProgramBuilder b(prog.name + "_jvp");
  // Tangent names must not collide with any primal name.
  for (auto& eqn : prog.eqns) {
    b.reserve(eqn.out.name);
  }
  for (auto& in : prog.inputs) {
    b.add_input_verbatim(in);
  }
  std::unordered_map<std::string, TangentAtom> tangent;
  for (auto& in : prog.inputs) {
    tangent.emplace(in.name, Atom(b.add_input("d" + in.name, in.shape)));
  }
  auto tangent_of = [&](const Atom& a) -> TangentAtom {
    if (a.is_lit()) {
      return std::nullopt;
    }
    return tangent.at(a.var().name);
  };
  std::vector<TangentAtom> ts;
  for (auto& eqn : prog.eqns) {
    b.append(eqn);
    ts.clear();
    for (auto& a : eqn.inputs) {
      ts.push_back(tangent_of(a));
    }
    tangent.emplace(eqn.out.name, apply_jvp_rule(eqn, ts, b));
  }
  std::vector<Atom> outs = prog.outputs;
  for (auto& a : prog.outputs) {
    TangentAtom t = tangent_of(a);
    outs.push_back(t ? *t : Atom(Tensor::zeros(a.shape())));
  }
  b.set_outputs(std::move(outs));
  return b.take();
}

PartialEvalResult partial_eval(
    const Program& prog, const std::vector<bool>& known, std::span<const Tensor> known_vals) {
  require_valid(prog, "[partial_eval]");
  if (known.size() != prog.inputs.size()) {
    throw std::invalid_argument("[partial_eval] one known flag per input required");
  }
  Env env;
  ProgramBuilder b(prog.name);
  size_t next_val = 0;
  for (size_t i = 0; i < prog.inputs.size(); ++i) {
    if (known[i]) {
      if (next_val >= known_vals.size()) {
        throw std::invalid_argument("[partial_eval] too few known values");
      }
      const Tensor& v = known_vals[next_val++];
      if (!(v.shape == prog.inputs[i].shape)) {
        throw std::invalid_argument(
            "[partial_eval] input " + prog.inputs[i].name + " expects " +
            prog.inputs[i].shape.str() + ", got " + v.shape.str());
      }
      env.emplace(prog.inputs[i].name, v);
    } else {
      b.add_input_verbatim(prog.inputs[i]);
    }
  }
  if (next_val != known_vals.size()) {
    throw std::invalid_argument("[partial_eval] too many known values");
  }

  auto lookup = [&](const Atom& a) -> const Tensor* {
    if (a.is_lit()) {
      return &a.lit();
    }
    auto it = env.find(a.var().name);
    return it == env.end() ? nullptr : &it->second;
  };

  std::vector<Tensor> args;
  for (auto& eqn : prog.eqns) {
    bool all_known = true;
    for (auto& a : eqn.inputs) {
      if (!lookup(a)) {
        all_known = false;
        break;
      }
    }
    if (all_known) {
      args.clear();
      for (auto& a : eqn.inputs) {
        args.push_back(*lookup(a));
      }
      env.emplace(eqn.out.name, eval_prim(eqn.prim, args, eqn.params));
      continue;
    }
    Equation staged = eqn;
    for (auto& a : staged.inputs) {
      if (const Tensor* v = lookup(a)) {
        a = Atom(*v);
      }
    }
    b.append(std::move(staged));
  }

  PartialEvalResult result;
  std::vector<Atom> staged_outs;
  for (auto& a : prog.outputs) {
    if (const Tensor* v = lookup(a)) {
      result.outputs.push_back(*v);
    } else {
      result.outputs.push_back(a.var());
      staged_outs.push_back(a);
    }
  }
  b.set_outputs(std::move(staged_outs));
  result.staged = b.take();
  return result;
}

std::pair<std::vector<Tensor>, LinearProgram> linearize(
    const Program& prog, std::span<const Tensor> x) {
  Program jp = jvp_transform(prog);
  std::vector<bool> known(jp.inputs.size(), false);
  for (size_t i = 0; i < prog.inputs.size(); ++i) {
    known[i] = true;
  }
  PartialEvalResult pe = partial_eval(jp, known, x);

  size_t m = prog.outputs.size();
  std::vector<Tensor> y;
  y.reserve(m);
  for (size_t i = 0; i < m; ++i) {
    if (!is_known(pe.outputs[i])) {
      throw std::logic_error("[linearize] primal output not resolved");
    }
    y.push_back(std::get<Tensor>(pe.outputs[i]));
  }

  LinearProgram lp;
  lp.prog = std::move(pe.staged);
  lp.prog.name = prog.name + "_lin";
  // partial_eval keeps only the unknown outputs; restore one tangent output
  // per primal output. A known tangent is necessarily the zero literal that
  // jvp_transform placed for a symbolically zero direction.
  std::vector<Atom> tangent_outs;
  tangent_outs.reserve(m);
  for (size_t i = 0; i < m; ++i) {
    const PartialValue& pv = pe.outputs[m + i];
    if (is_known(pv)) {
      const Tensor& t = std::get<Tensor>(pv);
      if (!t.is_zero()) {
        throw std::logic_error("[linearize] non-zero tangent resolved as known");
      }
      tangent_outs.push_back(Atom(t));
    } else {
      tangent_outs.push_back(Atom(std::get<Var>(pv)));
    }
  }
  lp.prog.outputs = std::move(tangent_outs);
  for (auto& in : lp.prog.inputs) {
    lp.linear_inputs.push_back(in.name);
  }

  auto diags = check_linear(lp);
  if (!diags.empty()) {
    throw std::logic_error(
        "[linearize] residual is not structurally linear\n" + format_diagnostics(diags));
  }
  return {std::move(y), std::move(lp)};
}

LinearProgram transpose_program(const LinearProgram& lp) {
  require_valid(lp.prog, "[transpose]");
  LinearityInfo info = analyze_linearity(lp);
  if (!info.diags.empty()) {
    throw std::invalid_argument(
        "[transpose] program is not structurally linear\n" + format_diagnostics(info.diags));
  }

  // Pre-evaluate everything that does not depend on a linear input. Values
  // reachable only through a non-linear program input have no value here;
  // they poison their dependents and error out only if used as a coefficient.
  std::unordered_map<std::string, std::optional<Tensor>> env;
  for (auto& in : lp.prog.inputs) {
    if (!info.is_linear(in.name)) {
      env.emplace(in.name, std::nullopt);
    }
  }
  std::vector<Tensor> args;
  for (auto& eqn : lp.prog.eqns) {
    if (info.is_linear(eqn.out.name)) {
      continue;
    }
    bool poisoned = false;
    args.clear();
    for (auto& a : eqn.inputs) {
      if (a.is_lit()) {
        args.push_back(a.lit());
        continue;
      }
      auto& slot = env.at(a.var().name);
      if (!slot) {
        poisoned = true;
        break;
      }
      args.push_back(*slot);
    }
    if (poisoned) {
      env.emplace(eqn.out.name, std::nullopt);
    } else {
      env.emplace(eqn.out.name, eval_prim(eqn.prim, args, eqn.params));
    }
  }

  ProgramBuilder b(lp.prog.name + "_t");
  CotangentMap ct;
  auto accumulate = [&](const std::string& name, const Atom& contribution) {
    auto it = ct.find(name);
    if (it == ct.end()) {
      ct.emplace(name, contribution);
    } else {
      it->second = b.emit(Prim::add, {it->second, contribution}, {}, "d" + name);
    }
  };

  for (auto& out : lp.prog.outputs) {
    std::string hint = out.is_var() ? "d" + out.var().name : "ct";
    Var ct_in = b.add_input(hint, out.shape());
    if (out.is_var()) {
      accumulate(out.var().name, Atom(ct_in));
    }
    // A literal output is an all-zero block (check_linear guarantees it);
    // its cotangent feeds nothing.
  }

  std::vector<std::optional<Atom>> known;
  for (auto it = lp.prog.eqns.rbegin(); it != lp.prog.eqns.rend(); ++it) {
    const Equation& eqn = *it;
    if (!info.is_linear(eqn.out.name)) {
      continue;
    }
    auto ct_it = ct.find(eqn.out.name);
    if (ct_it == ct.end()) {
      continue; // symbolic zero: nothing flows back
    }
    known.assign(eqn.inputs.size(), std::nullopt);
    for (size_t i = 0; i < eqn.inputs.size(); ++i) {
      const Atom& a = eqn.inputs[i];
      if (a.is_lit()) {
        known[i] = a;
      } else if (!info.is_linear(a.var().name)) {
        auto& slot = env.at(a.var().name);
        if (!slot) {
          throw std::invalid_argument(
              "[transpose] coefficient " + a.var().name +
              " depends on a non-linear program input and cannot be evaluated");
        }
        known[i] = Atom(*slot);
      }
    }
    Atom ct_atom = ct_it->second;
    auto contribs = apply_transpose_rule(eqn, ct_atom, known, b);
    for (size_t i = 0; i < contribs.size(); ++i) {
      if (contribs[i]) {
        accumulate(eqn.inputs[i].var().name, *contribs[i]);
      }
    }
  }

  LinearProgram out;
  std::vector<Atom> outs;
  for (auto& name : lp.linear_inputs) {
    const Var* src = nullptr;
    for (auto& in : lp.prog.inputs) {
      if (in.name == name) {
        src = &in;
        break;
      }
    }
    if (!src) {
      throw std::invalid_argument("[transpose] linear input " + name + " is not a program input");
    }
    auto it = ct.find(name);
    outs.push_back(it != ct.end() ? it->second : Atom(Tensor::zeros(src->shape)));
  }
  b.set_outputs(std::move(outs));
  out.prog = b.take();
  for (auto& in : out.prog.inputs) {
    out.linear_inputs.push_back(in.name);
  }
  return out;
}

VjpResult vjp(const Program& prog, std::span<const Tensor> x, std::span<const Tensor> ct) {
  auto [y, lp] = linearize(prog, x);
  LinearProgram lpt = transpose_program(lp);
  std::vector<Tensor> x_ct = eval_linear(lpt, ct);
  return {std::move(y), std::move(x_ct)};
}

std::vector<Tensor> grad(const Program& prog, std::span<const Tensor> x) {
  if (prog.outputs.size() != 1) {
    throw std::invalid_argument("[grad] program must have exactly one output");
  }
  if (prog.outputs[0].shape().rank() != 0) {
    throw std::invalid_argument(
        "[grad] output must be a scalar, got " + prog.outputs[0].shape().str());
  }
  Tensor one = Tensor::scalar(1.0);
  return vjp(prog, x, std::span<const Tensor>(&one, 1)).x_ct;
}

} // namespace linad
