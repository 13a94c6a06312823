#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cblue/blue.hpp"
#include "cblue/study.hpp"

namespace {

using namespace cblue;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

Interval parse_interval(const std::string& text) {
  auto comma = text.find(',');
  if (comma == std::string::npos) throw ParseError("interval must be given as A,B");
  Interval iv{std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  if (!iv.valid()) throw ParseError("interval must satisfy A < B");
  return iv;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  if (out.empty()) throw ParseError("empty N list");
  return out;
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream f(path);
  if (!f) throw ParseError("cannot open output file " + path);
  f << content;
}

struct CommonOpts {
  std::string kernel = "ibm:a=0";
  std::string drift = "1";
  std::string interval = "1,2";
  std::string ns = "3,5,10";
  std::string estimators;
  std::string preset;
  std::string eff_mode;  // empty keeps the preset/config default
  std::string format = "text";
  std::string out;
  std::string config_path;
  uint64_t seed = 20240801;
  int replicates = 20000;
  int grid = 201;
};

StudyConfig build_config(const CommonOpts& o) {
  StudyConfig c;
  if (!o.config_path.empty()) {
    std::ifstream f(o.config_path);
    if (!f) throw ParseError("cannot open config file " + o.config_path);
    nlohmann::json j;
    f >> j;
    c = StudyConfig::from_json(j);
  } else if (!o.preset.empty()) {
    c = preset_config(o.preset);
  } else {
    c.kernel_spec = o.kernel;
    c.drift_spec = o.drift;
    c.interval = parse_interval(o.interval);
    c.Ns = parse_int_list(o.ns);
    if (!o.estimators.empty()) {
      c.estimators.clear();
      std::istringstream ss(o.estimators);
      std::string item;
      while (std::getline(ss, item, ',')) c.estimators.push_back(item);
    }
  }
  if (!o.eff_mode.empty()) c.eff_mode = parse_eff_mode(o.eff_mode);
  c.format = o.format;
  c.seed = o.seed;
  c.replicates = o.replicates;
  return c;
}

int cmd_solve(const CommonOpts& o) {
  Interval iv = parse_interval(o.interval);
  KernelPtr kernel = parse_kernel(o.kernel, iv);
  DriftVector drift = DriftVector::parse(o.drift, iv);
  BlueSolution sol = solve(kernel, drift, iv);
  nlohmann::json j = blue_solution_to_json(sol);
  write_output(o.out, j.dump(2) + "\n");
  std::cerr << "residual_sup = " << sol.residual_sup << "\n";
  std::cerr << "covariance =\n" << sol.covariance << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& path, int grid) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open solution file " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  LoadedSolution loaded = blue_solution_from_json(j);
  ResidualReport rep =
      verify_wiener_hopf(loaded.solution, *loaded.kernel, *loaded.drift, grid);
  double csym = (loaded.solution.C - loaded.solution.C.transpose()).norm() /
                std::max(1e-300, loaded.solution.C.norm());
  std::cout << "residual_sup = " << rep.residual_sup << "\n";
  std::cout << "unbiasedness_defect = " << rep.unbiasedness_defect << "\n";
  std::cout << "c_symmetry_defect = " << csym << "\n";
  if (rep.residual_sup > loaded.solution.tolerance) {
    std::cerr << "residual above recorded tolerance " << loaded.solution.tolerance << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_table(const CommonOpts& o) {
  StudyConfig c = build_config(o);
  TableResult table = run_table(c);
  if (c.format == "csv") {
    write_output(o.out, table_to_csv(table));
  } else if (c.format == "json") {
    nlohmann::json j = table_to_json(table);
    write_output(o.out, j.dump(2) + "\n");
  } else {
    write_output(o.out, table_to_text(table));
  }
  return kExitOk;
}

int cmd_convergence(const CommonOpts& o) {
  StudyConfig c = build_config(o);
  if (o.estimators.empty() && o.preset.empty() && o.config_path.empty()) {
    c.estimators = {"values+derivs"};
  }
  auto rows = run_convergence(c);
  write_output(o.out, convergence_to_csv(rows));
  return kExitOk;
}

int cmd_mc(const CommonOpts& o) {
  StudyConfig c = build_config(o);
  if (o.estimators.empty() && o.preset.empty() && o.config_path.empty()) {
    c.estimators = {"blue-2n0"};
  }
  McResult mc = run_mc(c);
  nlohmann::json j = mc_to_json(mc);
  write_output(o.out, j.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time best linear unbiased estimation toolkit"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string verify_path;

  auto add_model_flags = [&](CLI::App* sub) {
    sub->add_option("--kernel", o.kernel, "kernel spec, e.g. matern32:lambda=1");
    sub->add_option("--drift", o.drift, "comma-separated drift expressions");
    sub->add_option("--interval", o.interval, "interval A,B");
  };
  auto add_study_flags = [&](CLI::App* sub) {
    sub->add_option("--N", o.ns, "comma-separated grid sizes");
    sub->add_option("--estimators", o.estimators, "estimator list");
    sub->add_option("--preset", o.preset, "table1|table2|table3");
    sub->add_option("--eff-mode", o.eff_mode, "scalar-ratio|det-root|trace-ratio");
    sub->add_option("--format", o.format, "text|csv|json");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--replicates", o.replicates, "Monte Carlo replicates");
    sub->add_option("--config", o.config_path, "JSON study configuration");
  };

  CLI::App* solve = app.add_subcommand("solve", "construct and verify an estimator");
  add_model_flags(solve);
  solve->add_option("--out", o.out, "output file (default stdout)");

  CLI::App* table = app.add_subcommand("table", "efficiency table for the comparison study");
  add_model_flags(table);
  add_study_flags(table);
  table->add_option("--out", o.out, "output file");

  CLI::App* verify = app.add_subcommand("verify", "re-check a solution file");
  verify->add_option("file", verify_path, "solution JSON")->required();
  verify->add_option("--grid", o.grid, "verification grid size");

  CLI::App* conv = app.add_subcommand("convergence", "discrete-to-continuous error sweep");
  add_model_flags(conv);
  add_study_flags(conv);
  conv->add_option("--out", o.out, "output file");

  CLI::App* mc = app.add_subcommand("mc", "Monte Carlo validation of estimator covariance");
  add_model_flags(mc);
  add_study_flags(mc);
  mc->add_option("--out", o.out, "output file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(o);
    if (table->parsed()) return cmd_table(o);
    if (verify->parsed()) return cmd_verify(verify_path, o.grid);
    if (conv->parsed()) return cmd_convergence(o);
    if (mc->parsed()) return cmd_mc(o);
  } catch (const NumericalFailureError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DegenerateModelError& e) {
    std::cerr << "degenerate model: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
