#include "linad/interp.hpp"

#include <stdexcept>
#include <unordered_map>

#include "linad/rules.hpp"

namespace linad {

namespace {

const Tensor& resolve(const Atom& a, const Env& env) {
  if (a.is_lit()) {
    return a.lit();
  }
  auto it = env.find(a.var().name);
  if (it == env.end()) {
    throw std::invalid_argument("[eval] unbound variable " + a.var().name);
  }
  return it->second;
}

} // namespace

std::vector<Tensor> eval_program(const Program& prog, std::span<const Tensor> inputs) {
  if (inputs.size() != prog.inputs.size()) {
    throw std::invalid_argument(
        "[eval] program " + prog.name + " takes " + std::to_string(prog.inputs.size()) +
        " inputs, got " + std::to_string(inputs.size()));
  }
  Env env;
  env.reserve(prog.inputs.size() + prog.eqns.size());
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (!(inputs[i].shape == prog.inputs[i].shape)) {
      throw std::invalid_argument(
          "[eval] input " + prog.inputs[i].name + " expects " + prog.inputs[i].shape.str() +
          ", got " + inputs[i].shape.str());
    }
    env.emplace(prog.inputs[i].name, inputs[i]);
  }
  std::vector<Tensor> args;
  for (auto& eqn : prog.eqns) {
    args.clear();
    args.reserve(eqn.inputs.size());
    for (auto& a : eqn.inputs) {
      args.push_back(resolve(a, env));
    }
    Tensor val = eval_prim(eqn.prim, args, eqn.params);
    if (!(val.shape == eqn.out.shape)) {
      throw std::logic_error(
          "[eval] " + eqn.out.name + ": computed shape " + val.shape.str() +
          " does not match annotation " + eqn.out.shape.str());
    }
    env.emplace(eqn.out.name, std::move(val));
  }
  std::vector<Tensor> outs;
  outs.reserve(prog.outputs.size());
  for (auto& a : prog.outputs) {
    outs.push_back(resolve(a, env));
  }
  return outs;
}

std::vector<Tensor> eval_linear(const LinearProgram& lp, std::span<const Tensor> inputs) {
  if (lp.linear_inputs.size() != lp.prog.inputs.size()) {
    throw std::invalid_argument("[eval] linear program has non-linear inputs");
  }
  for (size_t i = 0; i < lp.linear_inputs.size(); ++i) {
    if (lp.linear_inputs[i] != lp.prog.inputs[i].name) {
      throw std::invalid_argument("[eval] linear input order does not match the program");
    }
  }
  return eval_program(lp.prog, inputs);
}

} // namespace linad
