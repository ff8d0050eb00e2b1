#include "linad/ir.hpp"

#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "linad/rules.hpp"

namespace linad {

std::string Shape::str() const {
  std::ostringstream os;
  os << "f64";
  if (!dims.empty()) {
    os << "[";
    for (size_t i = 0; i < dims.size(); ++i) {
      if (i > 0) {
        os << ",";
      }
      os << dims[i];
    }
    os << "]";
  }
  return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (shape.rank() > 2) {
    throw std::invalid_argument("[tensor] rank " + std::to_string(shape.rank()) + " not supported");
  }
  for (auto dim : shape.dims) {
    if (dim < 0) {
      throw std::invalid_argument("[tensor] negative dimension");
    }
  }
  if (static_cast<std::int64_t>(data.size()) != shape.count()) {
    throw std::invalid_argument(
        "[tensor] data length " + std::to_string(data.size()) + " does not match shape " +
        shape.str());
  }
}

Tensor Tensor::zeros(const Shape& s) {
  return Tensor(s, std::vector<double>(static_cast<size_t>(s.count()), 0.0));
}

Tensor Tensor::scalar(double v) {
  return Tensor(scalar_shape(), {v});
}

Tensor Tensor::vec(std::vector<double> d) {
  auto n = static_cast<std::int64_t>(d.size());
  return Tensor(vec_shape(n), std::move(d));
}

Tensor Tensor::mat(std::int64_t r, std::int64_t c, std::vector<double> d) {
  return Tensor(mat_shape(r, c), std::move(d));
}

bool Tensor::is_zero() const {
  for (auto v : data) {
    if (v != 0.0) {
      return false;
    }
  }
  return true;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (auto v : data) {
    m = std::max(m, std::abs(v));
  }
  return m;
}

bool operator==(const Tensor& a, const Tensor& b) {
  if (!(a.shape == b.shape)) {
    return false;
  }
  for (size_t i = 0; i < a.data.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a.data[i]) != std::bit_cast<std::uint64_t>(b.data[i])) {
      return false;
    }
  }
  return true;
}

bool operator==(const Atom& a, const Atom& b) {
  if (a.is_var() != b.is_var()) {
    return false;
  }
  if (a.is_var()) {
    return a.var() == b.var();
  }
  return a.lit() == b.lit();
}

bool operator==(const Equation& a, const Equation& b) {
  return a.out == b.out && a.prim == b.prim && a.inputs == b.inputs && a.params == b.params;
}

bool operator==(const Program& a, const Program& b) {
  return a.name == b.name && a.inputs == b.inputs && a.eqns == b.eqns && a.outputs == b.outputs;
}

std::int64_t get_param(const Params& params, const std::string& name) {
  for (auto& [k, v] : params) {
    if (k == name) {
      return v;
    }
  }
  throw std::invalid_argument("[params] missing parameter \"" + name + "\"");
}

std::optional<std::int64_t> find_param(const Params& params, const std::string& name) {
  for (auto& [k, v] : params) {
    if (k == name) {
      return v;
    }
  }
  return std::nullopt;
}

std::string format_diagnostics(const std::vector<Diagnostic>& diags) {
  std::ostringstream os;
  for (size_t i = 0; i < diags.size(); ++i) {
    if (i > 0) {
      os << "\n";
    }
    if (diags[i].eqn >= 0) {
      os << "eqn " << diags[i].eqn << ": ";
    }
    os << diags[i].message;
  }
  return os.str();
}

namespace {

std::string eqn_label(const Equation& eqn) {
  return eqn.out.name + " = " + prim_name(eqn.prim);
}

bool shape_ok(const Shape& s) {
  if (s.rank() > 2) {
    return false;
  }
  for (auto d : s.dims) {
    if (d < 0) {
      return false;
    }
  }
  return true;
}

} // namespace

std::vector<Diagnostic> validate(const Program& prog) {
  std::vector<Diagnostic> diags;
  std::unordered_map<std::string, Shape> defined;

  for (auto& in : prog.inputs) {
    if (!shape_ok(in.shape)) {
      diags.push_back({"input " + in.name + ": unsupported shape " + in.shape.str()});
    }
    if (!defined.emplace(in.name, in.shape).second) {
      diags.push_back({"input " + in.name + ": duplicate definition"});
    }
  }

  auto check_atom = [&](const Atom& a, const std::string& where, int eqn_idx) {
    if (a.is_lit()) {
      if (!shape_ok(a.lit().shape)) {
        diags.push_back({where + ": unsupported literal shape", eqn_idx});
      }
      return;
    }
    auto it = defined.find(a.var().name);
    if (it == defined.end()) {
      diags.push_back({where + ": use of undefined variable " + a.var().name, eqn_idx});
    } else if (!(it->second == a.var().shape)) {
      diags.push_back(
          {where + ": variable " + a.var().name + " annotated " + a.var().shape.str() +
               " but defined as " + it->second.str(),
           eqn_idx});
    }
  };

  for (size_t i = 0; i < prog.eqns.size(); ++i) {
    auto& eqn = prog.eqns[i];
    auto idx = static_cast<int>(i);
    auto& spec = prim_spec(eqn.prim);

    bool inputs_ok = true;
    if (static_cast<int>(eqn.inputs.size()) != spec.arity) {
      diags.push_back(
          {eqn_label(eqn) + ": expected " + std::to_string(spec.arity) + " inputs, got " +
               std::to_string(eqn.inputs.size()),
           idx});
      inputs_ok = false;
    }
    for (auto& a : eqn.inputs) {
      size_t before = diags.size();
      check_atom(a, eqn_label(eqn), idx);
      if (diags.size() != before) {
        inputs_ok = false;
      }
    }

    if (inputs_ok) {
      std::vector<Shape> in_shapes;
      for (auto& a : eqn.inputs) {
        in_shapes.push_back(a.shape());
      }
      try {
        Shape inferred = infer_shape(eqn.prim, in_shapes, eqn.params);
        if (!(inferred == eqn.out.shape)) {
          diags.push_back(
              {eqn_label(eqn) + ": output annotated " + eqn.out.shape.str() + " but rule gives " +
                   inferred.str(),
               idx});
        }
      } catch (const std::invalid_argument& e) {
        diags.push_back({eqn_label(eqn) + ": " + e.what(), idx});
      }
    }

    if (!defined.emplace(eqn.out.name, eqn.out.shape).second) {
      diags.push_back({eqn_label(eqn) + ": redefinition of " + eqn.out.name, idx});
    }
  }

  for (auto& out : prog.outputs) {
    check_atom(out, "output", -1);
  }
  return diags;
}

LinearityInfo analyze_linearity(const LinearProgram& lp) {
  LinearityInfo info;
  std::unordered_set<std::string> linear_set(lp.linear_inputs.begin(), lp.linear_inputs.end());

  for (auto& in : lp.prog.inputs) {
    info.linear[in.name] = linear_set.count(in.name) > 0;
  }
  for (auto& name : lp.linear_inputs) {
    bool found = false;
    for (auto& in : lp.prog.inputs) {
      found = found || in.name == name;
    }
    if (!found) {
      info.diags.push_back({"linear input " + name + " is not a program input"});
    }
  }

  auto atom_linear = [&](const Atom& a) {
    return a.is_var() && info.is_linear(a.var().name);
  };
  auto atom_zero_lit = [&](const Atom& a) {
    return a.is_lit() && a.lit().is_zero();
  };

  for (size_t i = 0; i < lp.prog.eqns.size(); ++i) {
    auto& eqn = lp.prog.eqns[i];
    auto idx = static_cast<int>(i);
    auto& spec = prim_spec(eqn.prim);

    int n_linear = 0;
    for (auto& a : eqn.inputs) {
      n_linear += atom_linear(a) ? 1 : 0;
    }
    if (n_linear == 0) {
      info.linear[eqn.out.name] = false; // known subcomputation
      continue;
    }

    switch (spec.linearity) {
      case Linearity::nonlinear:
        info.diags.push_back(
            {eqn_label(eqn) + ": nonlinear primitive applied to a linear-dependent value", idx});
        break;
      case Linearity::linear_per_operand:
      case Linearity::linear_in_position:
        if (n_linear > 1) {
          info.diags.push_back(
              {eqn_label(eqn) + ": " + std::to_string(n_linear) +
                   " linear-dependent operands in a per-operand-linear primitive",
               idx});
        } else {
          for (size_t k = 0; k < eqn.inputs.size(); ++k) {
            if (atom_linear(eqn.inputs[k]) && !(spec.linear_positions & (1u << k))) {
              info.diags.push_back(
                  {eqn_label(eqn) + ": operand " + std::to_string(k) +
                       " is linear-dependent but the primitive is not linear in that position",
                   idx});
            }
          }
        }
        break;
      case Linearity::linear:
        // A known operand is only harmless when it is an exact zero;
        // anything else makes the result affine, not linear.
        for (size_t k = 0; k < eqn.inputs.size(); ++k) {
          auto& a = eqn.inputs[k];
          if (!atom_linear(a) && !atom_zero_lit(a)) {
            info.diags.push_back(
                {eqn_label(eqn) + ": operand " + std::to_string(k) +
                     " is a non-zero known value in a linear primitive (affine result)",
                 idx});
          }
        }
        break;
    }
    info.linear[eqn.out.name] = true;
  }

  for (auto& out : lp.prog.outputs) {
    if (atom_linear(out) || atom_zero_lit(out)) {
      continue;
    }
    if (out.is_lit()) {
      info.diags.push_back({"output: non-zero literal output breaks linearity"});
    } else {
      info.diags.push_back(
          {"output: " + out.var().name + " does not depend on any linear input"});
    }
  }
  return info;
}

std::vector<Diagnostic> check_linear(const LinearProgram& lp) {
  return analyze_linearity(lp).diags;
}

} // namespace linad
