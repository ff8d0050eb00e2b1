#include "linad/check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "linad/interp.hpp"
#include "linad/rules.hpp"
#include "linad/transforms.hpp"

namespace linad {

double uniform01(std::mt19937_64& rng) {
  // 53 high bits -> [0, 1). std::uniform_real_distribution is
  // implementation-defined; this draw is stable across toolchains.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::int64_t rand_range(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  // Inclusive bounds. Modulo bias is negligible at these range sizes.
  return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double min_mag, double max_mag) {
  std::vector<double> data(static_cast<size_t>(shape.count()));
  for (auto& v : data) {
    double mag = min_mag + uniform01(rng) * (max_mag - min_mag);
    v = uniform01(rng) < 0.5 ? -mag : mag;
  }
  return Tensor(shape, std::move(data));
}

std::vector<Tensor> random_inputs(
    std::span<const Var> vars, std::mt19937_64& rng, double min_mag, double max_mag) {
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (auto& v : vars) {
    out.push_back(random_tensor(v.shape, rng, min_mag, max_mag));
  }
  return out;
}

std::vector<double> flatten(std::span<const Tensor> ts) {
  std::vector<double> out;
  for (auto& t : ts) {
    out.insert(out.end(), t.data.begin(), t.data.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Program generator

namespace {

double min_abs(const Tensor& t) {
  double m = std::numeric_limits<double>::infinity();
  for (auto v : t.data) {
    m = std::min(m, std::abs(v));
  }
  return m;
}

struct ValueInfo {
  double ub = 0.0;       // magnitude upper bound estimate
  double lb = 0.0;       // elementwise magnitude lower bound (0 = unknown)
  bool from_exp = false; // exp output: safe divisor / log argument
  bool positive = false; // guaranteed elementwise positive
};

struct ScopeVar {
  Var v;
  ValueInfo info;
  bool depends; // reaches a program input
};

struct Operand {
  Atom atom;
  ValueInfo info;
  bool depends;
};

class Gen {
 public:
  explicit Gen(const GenConfig& cfg)
      : cfg_(cfg), rng_(cfg.seed), b_("g" + std::to_string(cfg.seed)) {
    if (cfg.max_dim < 1 || cfg.min_inputs < 1 || cfg.min_inputs > cfg.max_inputs ||
        cfg.min_mag <= 0.0 || cfg.min_mag > cfg.max_mag) {
      throw std::invalid_argument("[generate] bad config");
    }
  }

  Program run() {
    auto n_inputs = rand_range(rng_, cfg_.min_inputs, cfg_.max_inputs);
    for (std::int64_t i = 0; i < n_inputs; ++i) {
      Var v = b_.add_input("x" + std::to_string(i), rand_shape());
      scope_.push_back({v, {cfg_.max_mag, 0.0, false, false}, true});
    }
    n_input_vars_ = scope_.size();

    std::vector<Prim> prims = cfg_.prims;
    if (prims.empty()) {
      for (auto& spec : primitive_table()) {
        prims.push_back(spec.prim);
      }
    }
    auto n_eqns = rand_range(rng_, 0, cfg_.max_eqns);
    for (std::int64_t i = 0; i < n_eqns; ++i) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        Prim p = prims[static_cast<size_t>(rand_range(rng_, 0, std::ssize(prims) - 1))];
        if (try_emit(p)) {
          break;
        }
      }
    }
    choose_outputs();
    return b_.take();
  }

 private:
  std::int64_t rand_dim() {
    if (rand_range(rng_, 0, 23) == 0) {
      return 0; // rare empty extent; the IR allows it and oracles must cope
    }
    return rand_range(rng_, 1, cfg_.max_dim);
  }

  Shape rand_shape() {
    double r = uniform01(rng_);
    if (r < 0.25) {
      return scalar_shape();
    }
    if (r < 0.70) {
      return vec_shape(rand_dim());
    }
    return mat_shape(rand_dim(), rand_dim());
  }

  Shape rand_nonscalar_shape() {
    if (uniform01(rng_) < 0.6) {
      return vec_shape(rand_dim());
    }
    return mat_shape(rand_dim(), rand_dim());
  }

  template <typename Pred>
  std::optional<Operand> pick_var(Pred&& pred) {
    std::vector<size_t> cs;
    for (size_t i = 0; i < scope_.size(); ++i) {
      if (pred(scope_[i])) {
        cs.push_back(i);
      }
    }
    if (cs.empty()) {
      return std::nullopt;
    }
    auto& sv = scope_[cs[static_cast<size_t>(rand_range(rng_, 0, std::ssize(cs) - 1))]];
    return Operand{Atom(sv.v), sv.info, sv.depends};
  }

  Operand lit_operand(const Shape& s, bool positive) {
    Tensor t = random_tensor(s, rng_, cfg_.min_mag, cfg_.max_mag);
    if (positive) {
      for (auto& v : t.data) {
        v = std::abs(v);
      }
    }
    return {Atom(t), {t.max_abs(), min_abs(t), false, positive}, false};
  }

  // Any value at all; fresh literal with probability ~0.2.
  Operand any_operand() {
    if (!scope_.empty() && uniform01(rng_) >= 0.2) {
      return *pick_var([](const ScopeVar&) { return true; });
    }
    return lit_operand(rand_shape(), false);
  }

  Operand shaped_operand(const Shape& s) {
    if (uniform01(rng_) >= 0.2) {
      if (auto op = pick_var([&](const ScopeVar& sv) { return sv.v.shape == s; })) {
        return *op;
      }
    }
    return lit_operand(s, false);
  }

  Operand ranked_operand(int rank) {
    if (uniform01(rng_) >= 0.2) {
      if (auto op = pick_var([&](const ScopeVar& sv) { return sv.v.shape.rank() == rank; })) {
        return *op;
      }
    }
    Shape s = rank == 1 ? vec_shape(rand_dim()) : mat_shape(rand_dim(), rand_dim());
    return lit_operand(s, false);
  }

  bool finish(Prim p, std::vector<Operand> ops, Params params, ValueInfo info) {
    if (!std::isfinite(info.ub) || info.ub > cfg_.mag_cap) {
      return false;
    }
    std::vector<Atom> atoms;
    bool dep = false;
    for (auto& o : ops) {
      atoms.push_back(o.atom);
      dep |= o.depends;
    }
    Atom out = b_.emit(p, std::move(atoms), std::move(params), "t");
    scope_.push_back({out.var(), info, dep});
    return true;
  }

  bool try_emit(Prim p) {
    switch (p) {
      case Prim::add:
      case Prim::sub: {
        Operand a = any_operand();
        Operand b = shaped_operand(a.atom.shape());
        return finish(p, {a, b}, {}, {a.info.ub + b.info.ub});
      }
      case Prim::neg: {
        Operand a = any_operand();
        return finish(p, {a}, {}, {a.info.ub});
      }
      case Prim::mul: {
        Operand a = any_operand();
        bool use_scalar = a.atom.shape().rank() != 0 && uniform01(rng_) < 0.4;
        Operand b = shaped_operand(use_scalar ? scalar_shape() : a.atom.shape());
        return finish(p, {a, b}, {}, {a.info.ub * b.info.ub});
      }
      case Prim::div: {
        Operand a = any_operand();
        Operand d = divisor_operand(a.atom.shape());
        double ub = d.info.lb > 0.0 ? a.info.ub / d.info.lb
                                    : std::numeric_limits<double>::infinity();
        return finish(p, {a, d}, {}, {ub});
      }
      case Prim::sin:
      case Prim::cos: {
        Operand a = any_operand();
        return finish(p, {a}, {}, {1.0});
      }
      case Prim::exp: {
        Operand a = exp_arg_operand();
        return finish(
            p, {a}, {}, {std::exp(a.info.ub), std::exp(-a.info.ub), true, true});
      }
      case Prim::log: {
        Operand a = log_arg_operand();
        double ub = 0.0;
        if (a.atom.shape().count() > 0 && a.info.lb > 0.0 && std::isfinite(a.info.lb)) {
          ub = std::max(std::abs(std::log(a.info.lb)), std::abs(std::log(a.info.ub)));
        }
        return finish(p, {a}, {}, {ub});
      }
      case Prim::sum: {
        Operand a = uniform01(rng_) < 0.5 ? ranked_operand(1) : ranked_operand(2);
        double n = static_cast<double>(a.atom.shape().count());
        return finish(p, {a}, {}, {n * a.info.ub});
      }
      case Prim::broadcast: {
        Operand a = shaped_operand(scalar_shape());
        Shape target = rand_nonscalar_shape();
        Params params;
        if (target.rank() == 1) {
          params = {{"n", target.dims[0]}};
        } else {
          params = {{"rows", target.dims[0]}, {"cols", target.dims[1]}};
        }
        return finish(p, {a}, std::move(params), {a.info.ub});
      }
      case Prim::dot: {
        Operand a = ranked_operand(1);
        Operand b = shaped_operand(a.atom.shape());
        double n = static_cast<double>(a.atom.shape().count());
        return finish(p, {a, b}, {}, {n * a.info.ub * b.info.ub});
      }
      case Prim::matvec: {
        Operand m = ranked_operand(2);
        Operand v = shaped_operand(vec_shape(m.atom.shape().dims[1]));
        double n = static_cast<double>(m.atom.shape().dims[1]);
        return finish(p, {m, v}, {}, {n * m.info.ub * v.info.ub});
      }
      case Prim::outer: {
        Operand a = ranked_operand(1);
        Operand b = ranked_operand(1);
        return finish(p, {a, b}, {}, {a.info.ub * b.info.ub});
      }
      case Prim::transpose2d: {
        Operand a = ranked_operand(2);
        return finish(p, {a}, {}, {a.info.ub});
      }
      case Prim::slice: {
        Operand a = ranked_operand(1);
        auto n = a.atom.shape().dims[0];
        auto start = rand_range(rng_, 0, n);
        auto stop = rand_range(rng_, start, n);
        return finish(p, {a}, {{"start", start}, {"stop", stop}}, {a.info.ub});
      }
      case Prim::pad_zero: {
        Operand a = ranked_operand(1);
        auto start = rand_range(rng_, 0, 3);
        auto total = start + a.atom.shape().dims[0] + rand_range(rng_, 0, 3);
        return finish(p, {a}, {{"start", start}, {"total", total}}, {a.info.ub});
      }
      case Prim::concat: {
        Operand a = ranked_operand(1);
        Operand b = ranked_operand(1);
        return finish(p, {a, b}, {}, {std::max(a.info.ub, b.info.ub)});
      }
    }
    return false;
  }

  // Divisors come from exp outputs or fresh literals, both bounded away
  // from zero, so div stays far from its singularity under FD perturbation.
  Operand divisor_operand(const Shape& num_shape) {
    if (uniform01(rng_) < 0.6) {
      auto op = pick_var([&](const ScopeVar& sv) {
        return sv.info.from_exp &&
               (sv.v.shape == num_shape || sv.v.shape.rank() == 0);
      });
      if (op) {
        return *op;
      }
    }
    bool scalar = num_shape.rank() == 0 || uniform01(rng_) < 0.5;
    return lit_operand(scalar ? scalar_shape() : num_shape, false);
  }

  // log needs positive arguments: exp outputs or positive literals.
  Operand log_arg_operand() {
    if (uniform01(rng_) < 0.6) {
      if (auto op = pick_var([](const ScopeVar& sv) { return sv.info.from_exp; })) {
        return *op;
      }
    }
    return lit_operand(rand_shape(), true);
  }

  // Anything whose exp stays under the magnitude cap.
  Operand exp_arg_operand() {
    double max_ub = std::log(cfg_.mag_cap);
    if (uniform01(rng_) >= 0.2) {
      auto op = pick_var([&](const ScopeVar& sv) { return sv.info.ub <= max_ub; });
      if (op) {
        return *op;
      }
    }
    return lit_operand(rand_shape(), false);
  }

  void choose_outputs() {
    std::vector<Atom> outs;
    auto k = rand_range(rng_, 1, 3);
    for (std::int64_t i = 0; i < k; ++i) {
      double r = uniform01(rng_);
      if (r < 0.05) {
        outs.push_back(lit_operand(rand_shape(), false).atom);
        continue;
      }
      bool prefer_eqn = scope_.size() > n_input_vars_ && r < 0.85;
      size_t lo = prefer_eqn ? n_input_vars_ : 0;
      auto& sv = scope_[static_cast<size_t>(
          rand_range(rng_, static_cast<std::int64_t>(lo), std::ssize(scope_) - 1))];
      outs.push_back(Atom(sv.v));
    }
    bool has_dependent = false;
    for (auto& a : outs) {
      if (a.is_var() && depends(a.var().name)) {
        has_dependent = true;
        break;
      }
    }
    if (!has_dependent) {
      // Walk back to the last input-dependent var; inputs qualify.
      for (auto it = scope_.rbegin(); it != scope_.rend(); ++it) {
        if (it->depends) {
          outs.push_back(Atom(it->v));
          break;
        }
      }
    }
    if (uniform01(rng_) < 0.15) {
      outs.push_back(outs[static_cast<size_t>(rand_range(rng_, 0, std::ssize(outs) - 1))]);
    }
    b_.set_outputs(std::move(outs));
  }

  bool depends(const std::string& name) const {
    for (auto& sv : scope_) {
      if (sv.v.name == name) {
        return sv.depends;
      }
    }
    return false;
  }

  const GenConfig& cfg_;
  std::mt19937_64 rng_;
  ProgramBuilder b_;
  std::vector<ScopeVar> scope_;
  size_t n_input_vars_ = 0;
};

} // namespace

Program generate_program(const GenConfig& cfg) {
  return Gen(cfg).run();
}

// ---------------------------------------------------------------------------
// Oracles

std::vector<Tensor> finite_diff_jvp(
    const Program& prog, std::span<const Tensor> x, std::span<const Tensor> v, double eps) {
  if (eps <= 0.0) {
    throw std::invalid_argument("[fd] eps must be positive");
  }
  if (v.size() != x.size()) {
    throw std::invalid_argument("[fd] one direction tensor per input required");
  }
  std::vector<Tensor> xp(x.begin(), x.end());
  std::vector<Tensor> xm(x.begin(), x.end());
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(v[i].shape == x[i].shape)) {
      throw std::invalid_argument("[fd] direction shape mismatch at input " + std::to_string(i));
    }
    for (size_t j = 0; j < x[i].data.size(); ++j) {
      xp[i].data[j] += eps * v[i].data[j];
      xm[i].data[j] -= eps * v[i].data[j];
    }
  }
  std::vector<Tensor> yp = eval_program(prog, xp);
  std::vector<Tensor> ym = eval_program(prog, xm);
  for (size_t i = 0; i < yp.size(); ++i) {
    for (size_t j = 0; j < yp[i].data.size(); ++j) {
      yp[i].data[j] = (yp[i].data[j] - ym[i].data[j]) / (2.0 * eps);
    }
  }
  return yp;
}

namespace {

// Zero tensors shaped like `vars` with a single 1.0 at flat position j.
std::vector<Tensor> basis_inputs(std::span<const Var> vars, size_t j) {
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (auto& v : vars) {
    out.push_back(Tensor::zeros(v.shape));
    auto n = out.back().data.size();
    if (j < n) {
      out.back().data[j] = 1.0;
      j = std::numeric_limits<size_t>::max(); // placed; stay clear of later blocks
    } else {
      j -= n;
    }
  }
  return out;
}

size_t total_count(std::span<const Var> vars) {
  size_t n = 0;
  for (auto& v : vars) {
    n += static_cast<size_t>(v.shape.count());
  }
  return n;
}

} // namespace

Tensor dense_matrix_of_linear(const LinearProgram& lp) {
  auto diags = check_linear(lp);
  if (!diags.empty()) {
    throw std::invalid_argument(
        "[dense] program is not structurally linear\n" + format_diagnostics(diags));
  }
  size_t cols = total_count(lp.prog.inputs);
  size_t rows = 0;
  for (auto& a : lp.prog.outputs) {
    rows += static_cast<size_t>(a.shape().count());
  }
  Tensor m = Tensor::zeros(mat_shape(
      static_cast<std::int64_t>(rows), static_cast<std::int64_t>(cols)));
  for (size_t j = 0; j < cols; ++j) {
    auto outs = eval_linear(lp, basis_inputs(lp.prog.inputs, j));
    auto col = flatten(outs);
    for (size_t i = 0; i < rows; ++i) {
      m.data[i * cols + j] = col[i];
    }
  }
  return m;
}

double dot_product_check(const LinearProgram& lp, int trials, std::uint64_t seed) {
  LinearProgram lpt = transpose_program(lp);
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    std::vector<Tensor> v = random_inputs(lp.prog.inputs, rng);
    std::vector<Tensor> w;
    for (auto& a : lp.prog.outputs) {
      w.push_back(random_tensor(a.shape(), rng));
    }
    auto lv = flatten(eval_linear(lp, v));
    auto ltw = flatten(eval_linear(lpt, w));
    auto vf = flatten(v);
    auto wf = flatten(w);
    double a = 0.0;
    for (size_t i = 0; i < lv.size(); ++i) {
      a += lv[i] * wf[i];
    }
    double b = 0.0;
    for (size_t i = 0; i < vf.size(); ++i) {
      b += vf[i] * ltw[i];
    }
    worst = std::max(worst, std::abs(a - b) / (1.0 + std::abs(a)));
  }
  return worst;
}

Tensor jacobian_via_jvp(const Program& prog, std::span<const Tensor> x) {
  auto [y, lp] = linearize(prog, x);
  size_t cols = total_count(prog.inputs);
  size_t rows = flatten(y).size();
  Tensor m = Tensor::zeros(mat_shape(
      static_cast<std::int64_t>(rows), static_cast<std::int64_t>(cols)));
  for (size_t j = 0; j < cols; ++j) {
    auto col = flatten(eval_linear(lp, basis_inputs(lp.prog.inputs, j)));
    for (size_t i = 0; i < rows; ++i) {
      m.data[i * cols + j] = col[i];
    }
  }
  return m;
}

Tensor jacobian_via_vjp(const Program& prog, std::span<const Tensor> x) {
  size_t cols = total_count(prog.inputs);
  size_t rows = 0;
  for (auto& a : prog.outputs) {
    rows += static_cast<size_t>(a.shape().count());
  }
  Tensor m = Tensor::zeros(mat_shape(
      static_cast<std::int64_t>(rows), static_cast<std::int64_t>(cols)));
  for (size_t i = 0; i < rows; ++i) {
    std::vector<Tensor> ct;
    size_t pos = i;
    for (auto& a : prog.outputs) {
      ct.push_back(Tensor::zeros(a.shape()));
      auto n = ct.back().data.size();
      if (pos < n) {
        ct.back().data[pos] = 1.0;
        pos = std::numeric_limits<size_t>::max();
      } else {
        pos -= n;
      }
    }
    auto row = flatten(vjp(prog, x, ct).x_ct);
    for (size_t j = 0; j < cols; ++j) {
      m.data[i * cols + j] = row[j];
    }
  }
  return m;
}

} // namespace linad
