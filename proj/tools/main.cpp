#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "linad/check.hpp"
#include "linad/interp.hpp"
#include "linad/selftest.hpp"
#include "linad/text.hpp"
#include "linad/transforms.hpp"

using namespace linad;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Program load_program(const std::string& path) {
  Program prog = parse_program(read_file(path));
  auto diags = validate(prog);
  if (!diags.empty()) {
    throw std::runtime_error(path + ": invalid program\n" + format_diagnostics(diags));
  }
  return prog;
}

// A tensor option takes one literal per occurrence, or several literals
// inside one quoted word; join and split on literal boundaries.
std::vector<Tensor> tensors_of(const std::vector<std::string>& words) {
  std::string joined;
  for (auto& w : words) {
    joined += w;
    joined += ' ';
  }
  return parse_tensor_list(joined);
}

CLI::Option* tensor_option(CLI::App* cmd, const std::string& flag,
                           std::vector<std::string>& target, const std::string& desc) {
  // allow_extra_args(false) stops CLI11 from re-tokenizing bracketed
  // literals; each occurrence keeps its word verbatim.
  return cmd->add_option(flag, target, desc + " (quote literals containing spaces)")
      ->expected(-1)
      ->allow_extra_args(false);
}

void print_tensors(std::span<const Tensor> ts) {
  for (auto& t : ts) {
    std::cout << print_tensor(t) << "\n";
  }
}

int cmd_check(const Program& prog, int trials, std::uint64_t seed) {
  bool all = true;
  auto line = [&](const char* name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS " : "FAIL ") << name;
    if (!detail.empty()) {
      std::cout << " (" << detail << ")";
    }
    std::cout << "\n";
    all &= pass;
  };

  std::mt19937_64 rng(seed);
  std::vector<Tensor> x = random_inputs(prog.inputs, rng);
  auto [y, lp] = linearize(prog, x);

  double worst_fd = 0.0;
  double eps = 1e-6;
  for (auto& t : x) {
    eps = std::max(eps, 1e-6 * (1.0 + t.max_abs()));
  }
  for (int d = 0; d < std::max(1, trials / 4); ++d) {
    std::vector<Tensor> v = random_inputs(prog.inputs, rng);
    std::vector<Tensor> fd = finite_diff_jvp(prog, x, v, eps);
    std::vector<Tensor> ad = eval_linear(lp, v);
    for (size_t i = 0; i < fd.size(); ++i) {
      double num = 0.0;
      for (size_t j = 0; j < fd[i].data.size(); ++j) {
        num = std::max(num, std::abs(fd[i].data[j] - ad[i].data[j]));
      }
      worst_fd = std::max(worst_fd, num / (1.0 + fd[i].max_abs()));
    }
  }
  line("finite differences vs linearize", worst_fd <= 1e-5,
       "max rel err " + sci(worst_fd));

  Tensor jf = jacobian_via_jvp(prog, x);
  Tensor jr = jacobian_via_vjp(prog, x);
  double jdiff = 0.0;
  for (size_t i = 0; i < jf.data.size(); ++i) {
    jdiff = std::max(jdiff, std::abs(jf.data[i] - jr.data[i]));
  }
  double jtol = 1e-10 * (1.0 + jf.max_abs());
  line("jacobian agreement (jvp vs vjp)", jdiff <= jtol, "max diff " + sci(jdiff));

  double res = dot_product_check(lp, trials, seed);
  line("dot-product identity on the linearized map", res <= 1e-9,
       "max residual " + sci(res));

  // If the file itself is a linear program, transpose it directly too.
  LinearProgram self;
  self.prog = prog;
  for (auto& in : prog.inputs) {
    self.linear_inputs.push_back(in.name);
  }
  if (check_linear(self).empty()) {
    double sres = dot_product_check(self, trials, seed + 1);
    line("dot-product identity on the program itself", sres <= 1e-9,
         "max residual " + sci(sres));
  }
  return all ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"straight-line tensor programs: evaluation, differentiation, transposition"};
  app.require_subcommand(1);

  std::string file;
  std::vector<std::string> at_words, ct_words, arg_words, linear_spec;
  int trials = 20;
  std::uint64_t seed = 0;
  int corpus = 200;

  auto* eval_cmd = app.add_subcommand("eval", "evaluate FILE on --args tensors");
  eval_cmd->add_option("file", file)->required();
  tensor_option(eval_cmd, "--args", arg_words, "input tensors");

  auto* jvp_cmd = app.add_subcommand("jvp", "print the forward-derivative program of FILE");
  jvp_cmd->add_option("file", file)->required();

  auto* lin_cmd =
      app.add_subcommand("linearize", "print primal outputs and the staged linear program");
  lin_cmd->add_option("file", file)->required();
  tensor_option(lin_cmd, "--at", at_words, "evaluation point")->required();

  auto* tr_cmd = app.add_subcommand("transpose", "print the transposed linear program");
  tr_cmd->add_option("file", file)->required();
  tr_cmd->add_option("--linear", linear_spec,
                     "comma-separated input indices treated as linear (default: all)");

  auto* vjp_cmd = app.add_subcommand("vjp", "print primal outputs, then input cotangents");
  vjp_cmd->add_option("file", file)->required();
  tensor_option(vjp_cmd, "--at", at_words, "evaluation point")->required();
  tensor_option(vjp_cmd, "--ct", ct_words, "output cotangents")->required();

  auto* grad_cmd = app.add_subcommand("grad", "print the gradient of a scalar-output program");
  grad_cmd->add_option("file", file)->required();
  tensor_option(grad_cmd, "--at", at_words, "evaluation point")->required();

  auto* check_cmd = app.add_subcommand("check", "run derivative/transposition checks on FILE");
  check_cmd->add_option("file", file)->required();
  check_cmd->add_option("--trials", trials, "dot-product trials");
  check_cmd->add_option("--seed", seed, "rng seed");

  auto* self_cmd = app.add_subcommand("selftest", "run the full property suite");
  self_cmd->add_option("--seed", seed, "base rng seed");
  self_cmd->add_option("--corpus", corpus, "number of generated programs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(eval_cmd)) {
      print_tensors(eval_program(load_program(file), tensors_of(arg_words)));
    } else if (app.got_subcommand(jvp_cmd)) {
      std::cout << print_program(jvp_transform(load_program(file)));
    } else if (app.got_subcommand(lin_cmd)) {
      auto [y, lp] = linearize(load_program(file), tensors_of(at_words));
      print_tensors(y);
      std::cout << print_program(lp.prog);
    } else if (app.got_subcommand(tr_cmd)) {
      Program prog = load_program(file);
      LinearProgram lp;
      if (linear_spec.empty()) {
        for (auto& in : prog.inputs) {
          lp.linear_inputs.push_back(in.name);
        }
      } else {
        std::string joined;
        for (auto& w : linear_spec) {
          joined += w;
          joined += ',';
        }
        std::stringstream ss(joined);
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (item.empty()) {
            continue;
          }
          size_t idx = std::stoul(item);
          if (idx >= prog.inputs.size()) {
            throw std::runtime_error("--linear index " + item + " out of range");
          }
          lp.linear_inputs.push_back(prog.inputs[idx].name);
        }
      }
      lp.prog = std::move(prog);
      std::cout << print_program(transpose_program(lp).prog);
    } else if (app.got_subcommand(vjp_cmd)) {
      VjpResult r = vjp(load_program(file), tensors_of(at_words), tensors_of(ct_words));
      print_tensors(r.y);
      print_tensors(r.x_ct);
    } else if (app.got_subcommand(grad_cmd)) {
      print_tensors(grad(load_program(file), tensors_of(at_words)));
    } else if (app.got_subcommand(check_cmd)) {
      return cmd_check(load_program(file), trials, seed);
    } else if (app.got_subcommand(self_cmd)) {
      SelftestOptions opts;
      opts.seed = seed;
      opts.corpus = corpus;
      return run_selftest(opts, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
