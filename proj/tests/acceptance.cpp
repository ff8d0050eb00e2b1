// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Usage: linad_acceptance <cli> <mutated-cli> <repo-root>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "linad/check.hpp"
#include "linad/interp.hpp"
#include "linad/rules.hpp"
#include "linad/text.hpp"
#include "linad/transforms.hpp"

using namespace linad;

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Gate {
  bool all = true;

  void line(int idx, const std::string& name, bool pass, const std::string& detail = "") {
    std::cout << (pass ? "PASS" : "FAIL") << "  " << idx << ". " << name;
    if (!detail.empty()) {
      std::cout << " (" << detail << ")";
    }
    std::cout << "\n";
    all &= pass;
  }
};

std::vector<Tensor> point_for(const Program& prog, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 1);
  return random_inputs(prog.inputs, rng);
}

double max_abs_all(std::span<const Tensor> ts) {
  double m = 0.0;
  for (auto& t : ts) {
    m = std::max(m, t.max_abs());
  }
  return m;
}

double max_elem_diff(const Tensor& a, const Tensor& b) {
  if (!(a.shape == b.shape)) {
    return 1e300;
  }
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  }
  return m;
}

Tensor transposed(const Tensor& t) {
  Tensor out = Tensor::zeros(mat_shape(t.shape.dims[1], t.shape.dims[0]));
  for (std::int64_t i = 0; i < t.shape.dims[0]; ++i) {
    for (std::int64_t j = 0; j < t.shape.dims[1]; ++j) {
      out.data[j * t.shape.dims[0] + i] = t.data[i * t.shape.dims[1] + j];
    }
  }
  return out;
}

std::int64_t nnz(const Tensor& t) {
  std::int64_t n = 0;
  for (double v : t.data) {
    n += v != 0.0;
  }
  return n;
}

bool bitwise_equal(std::span<const Tensor> a, std::span<const Tensor> b) {
  if (a.size() != b.size()) {
    return false;
  }
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) {
      return false;
    }
  }
  return true;
}

int run_capture(const std::string& cmd, std::string& out) {
  FILE* p = popen((cmd + " 2>/dev/null").c_str(), "r");
  if (!p) {
    return -1;
  }
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) {
    out.append(buf, n);
  }
  int st = pclose(p);
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

} // namespace

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: linad_acceptance <cli> <mutated-cli> <repo-root>\n";
    return 2;
  }
  std::string cli = argv[1];
  std::string mutated = argv[2];
  std::string root = argv[3];
  Gate gate;

  // 1. Linearizing 1000 generated programs yields structurally linear
  //    residuals with no nonlinear primitives staged.
  {
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      GenConfig cfg;
      cfg.seed = seed;
      Program prog = generate_program(cfg);
      auto [y, lp] = linearize(prog, point_for(prog, seed));
      bool clean = check_linear(lp).empty();
      for (auto& e : lp.prog.eqns) {
        clean &= prim_spec(e.prim).linearity != Linearity::nonlinear;
      }
      ok += clean;
    }
    gate.line(1, "linearize produces structurally linear residuals", ok == 1000,
              std::to_string(ok) + "/1000");
  }

  // The 500-program linear corpus shared by criteria 2, 5 and 6.
  std::vector<Program> corpus_prog;
  std::vector<std::vector<Tensor>> corpus_x;
  std::vector<LinearProgram> corpus_lp;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    GenConfig cfg;
    cfg.seed = seed;
    Program prog = generate_program(cfg);
    std::vector<Tensor> x = point_for(prog, seed);
    auto [y, lp] = linearize(prog, x);
    corpus_prog.push_back(std::move(prog));
    corpus_x.push_back(std::move(x));
    corpus_lp.push_back(std::move(lp));
  }

  // 2. Transposition satisfies the dot-product identity and densifies to the
  //    transposed matrix.
  {
    double worst_res = 0.0;
    double worst_dense = 0.0;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
      const LinearProgram& lp = corpus_lp[seed];
      worst_res = std::max(worst_res, dot_product_check(lp, 20, seed));
      Tensor a = dense_matrix_of_linear(lp);
      Tensor at = dense_matrix_of_linear(transpose_program(lp));
      worst_dense = std::max(worst_dense, max_elem_diff(transposed(a), at));
    }
    gate.line(2, "transpose passes dot-product and dense-matrix checks",
              worst_res <= 1e-9 && worst_dense <= 1e-12,
              "max residual " + sci(worst_res) + ", max dense diff " +
                  sci(worst_dense));
  }

  // 3. Jacobians assembled via jvp and via vjp agree.
  {
    int tested = 0;
    int ok = 0;
    for (std::uint64_t seed = 0; tested < 300 && seed < 20000; ++seed) {
      GenConfig cfg;
      cfg.seed = seed;
      Program prog = generate_program(cfg);
      std::int64_t total = 0;
      for (auto& v : prog.inputs) {
        total += v.shape.count();
      }
      for (auto& o : prog.outputs) {
        total += o.shape().count();
      }
      if (total > 12) {
        continue;
      }
      ++tested;
      std::vector<Tensor> x = point_for(prog, seed);
      Tensor jf = jacobian_via_jvp(prog, x);
      Tensor jr = jacobian_via_vjp(prog, x);
      ok += max_elem_diff(jf, jr) <= 1e-10 * (1.0 + jf.max_abs());
    }
    gate.line(3, "jacobian via jvp matches jacobian via vjp", tested == 300 && ok == 300,
              std::to_string(ok) + "/" + std::to_string(tested));
  }

  // 4. Directional derivatives match central finite differences.
  {
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      GenConfig cfg;
      cfg.seed = seed;
      Program prog = generate_program(cfg);
      std::vector<Tensor> x = point_for(prog, seed);
      auto [y, lp] = linearize(prog, x);
      double eps = 1e-6 * (1.0 + max_abs_all(x));
      std::mt19937_64 rng(seed ^ 0xd1b54a32d192ed03ull);
      bool good = true;
      for (int d = 0; d < 5; ++d) {
        std::vector<Tensor> v = random_inputs(prog.inputs, rng);
        std::vector<Tensor> fd = finite_diff_jvp(prog, x, v, eps);
        std::vector<Tensor> ad = eval_linear(lp, v);
        for (size_t i = 0; i < fd.size(); ++i) {
          double rel = max_elem_diff(fd[i], ad[i]) / (1.0 + fd[i].max_abs());
          good &= rel <= 1e-5;
        }
      }
      ok += good;
    }
    gate.line(4, "linearize matches central finite differences", ok == 300,
              std::to_string(ok) + "/300");
  }

  // 5. Transposition is an involution up to the dense matrix.
  {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
      const LinearProgram& lp = corpus_lp[seed];
      Tensor a = dense_matrix_of_linear(lp);
      Tensor b = dense_matrix_of_linear(transpose_program(transpose_program(lp)));
      worst = std::max(worst, max_elem_diff(a, b));
    }
    gate.line(5, "transpose is an involution on the dense matrix", worst <= 1e-12,
              "max diff " + sci(worst));
  }

  // 6. vjp reproduces the primal outputs bitwise.
  {
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
      const Program& prog = corpus_prog[seed];
      std::mt19937_64 rng(seed ^ 0x94d049bb133111ebull);
      std::vector<Tensor> ct;
      for (auto& o : prog.outputs) {
        ct.push_back(random_tensor(o.shape(), rng));
      }
      VjpResult r = vjp(prog, corpus_x[seed], ct);
      ok += bitwise_equal(r.y, eval_program(prog, corpus_x[seed]));
    }
    gate.line(6, "vjp primal outputs are bitwise identical to eval", ok == 500,
              std::to_string(ok) + "/500");
  }

  // 7. On structure-only programs, transposition preserves the sparsity count.
  {
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      GenConfig cfg;
      cfg.seed = seed;
      cfg.prims = { Prim::slice, Prim::pad_zero, Prim::concat, Prim::broadcast,
                    Prim::sum,   Prim::neg,      Prim::add };
      Program prog = generate_program(cfg);
      auto [y, lp] = linearize(prog, point_for(prog, seed));
      Tensor a = dense_matrix_of_linear(lp);
      Tensor at = dense_matrix_of_linear(transpose_program(lp));
      ok += nnz(a) == nnz(at);
    }
    gate.line(7, "structure-only transposes preserve the nonzero count", ok == 100,
              std::to_string(ok) + "/100");
  }

  // 8. Rule-count report (informational: the ratio depends on the registry).
  {
    int rules = 0;
    int prims = 0;
    for (const auto& spec : primitive_table()) {
      ++prims;
      rules += spec.transpose != nullptr;
    }
    std::ostringstream note;
    note << rules << " transpose rules for " << prims
         << " jvp rules; the ratio is registry-dependent";
    gate.line(8, "transposition needs rules only for the linear primitives",
              rules == 14 && prims == 18, note.str());
  }

  // 9. Golden files round trip; the CLI computes a known gradient; the
  //    mutated build fails its selftest.
  {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    for (auto& entry : fs::directory_iterator(root + "/tests/golden")) {
      if (entry.path().extension() == ".lin") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    int round_trips = 0;
    for (auto& path : files) {
      std::ifstream in(path);
      std::stringstream ss;
      ss << in.rdbuf();
      std::string text = ss.str();
      try {
        Program prog = parse_program(text);
        round_trips += print_program(prog) == text && parse_program(print_program(prog)) == prog;
      } catch (const std::exception&) {
      }
    }

    std::string got;
    int rc = run_capture(
        "'" + cli + "' grad '" + root + "/programs/sumsq.lin' --at [1,2,3]", got);
    bool grad_ok = rc == 0 && got == "[2, 4, 6]\n";

    std::string ignored;
    int mrc = run_capture("'" + mutated + "' selftest --corpus 40", ignored);
    bool canary_ok = mrc > 0;

    gate.line(9, "golden files, CLI gradient and mutation canary",
              files.size() == 50 && round_trips == 50 && grad_ok && canary_ok,
              std::to_string(round_trips) + "/" + std::to_string(files.size()) +
                  " round trips, grad rc " + std::to_string(rc) + ", mutated selftest rc " +
                  std::to_string(mrc));
  }

  std::cout << (gate.all ? "acceptance: all criteria passed\n"
                         : "acceptance: CRITERIA FAILED\n");
  return gate.all ? 0 : 1;
}
