#include "pam/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

namespace {

int cmd_run(const pam::ExperimentConfig& cfg) {
  const auto s = pam::run_experiment(cfg);
  std::cout.precision(6);
  std::cout << pam::to_string(cfg.experiment) << ": " << pam::to_string(s.result.status) << ", "
            << s.result.trace.size() << " iterations, objective " << s.initial_objective
            << " -> " << s.final_objective << ", " << s.result.trace.total_inner_steps()
            << " inner steps, " << s.wall_seconds << " s\n"
            << "wrote " << cfg.out_dir.string() << "/trace.csv and summary.txt\n";
  return s.result.ok() ? 0 : 3;
}

int cmd_report(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  pam::OptimizationTrace trace;
  try {
    trace = pam::read_trace_csv(is);
  } catch (const pam::TraceFormatError& e) {
    throw std::runtime_error(path + ":" + e.what());
  }
  pam::print_report(std::cout, pam::report(trace));
  return 0;
}

int cmd_gradcheck(const std::string& experiment, std::size_t n, std::size_t m,
                  std::uint64_t seed) {
  const auto e = pam::parse_experiment(experiment);
  if (e == pam::Experiment::scalar_certified) {
    throw std::invalid_argument("gradcheck supports crn and nn");
  }
  const auto kind = e == pam::Experiment::crn ? pam::models::ModelKind::crn
                                              : pam::models::ModelKind::nn;
  const auto r = pam::gradcheck(kind, n, m, seed);
  std::printf("max relative error (adjoint vs central differences): %.3e\n",
              r.max_relative_error);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persistent adjoint method with dynamic time-scaling"};
  app.require_subcommand(1);

  pam::ExperimentConfig cfg;
  std::string experiment;
  std::string mode;
  auto* run = app.add_subcommand("run", "Run an experiment and write its trace");
  run->add_option("experiment", experiment, "crn | nn | scalar-certified")->required();
  run->add_option("--n", cfg.n, "Species (crn) or nodes (nn)");
  run->add_option("--m", cfg.m, "Number of instances");
  run->add_option("--seed", cfg.seed, "Dataset seed");
  run->add_option("--eps", cfg.epsilon, "Step size (empirical mode)");
  run->add_option("--delta", cfg.delta, "Time-scale constant (empirical mode)");
  run->add_option("--iters", cfg.iterations, "Outer iterations");
  run->add_option("--mode", mode, "empirical | certified");
  run->add_option("--alpha-c", cfg.alpha_c, "Certified mode: alpha_c in (0, 1/2)");
  run->add_option("--alpha-eps", cfg.alpha_eps, "Certified mode: alpha_eps in (0, 1)");
  run->add_option("--alpha-delta", cfg.alpha_delta, "Certified mode: alpha_delta in (0, 1)");
  run->add_option("--stride", cfg.objective_stride, "Objective sampling stride (0 disables)");
  std::string out = "out";
  run->add_option("--out", out, "Output directory");

  std::string trace_path;
  auto* rep = app.add_subcommand("report", "Summarize a trace CSV");
  rep->add_option("trace", trace_path, "trace.csv")->required();

  std::string gc_experiment;
  std::size_t gc_n = 5, gc_m = 3;
  std::uint64_t gc_seed = 1;
  auto* gc = app.add_subcommand("gradcheck", "Compare adjoint and finite-difference gradients");
  gc->add_option("experiment", gc_experiment, "crn | nn")->required();
  gc->add_option("--n", gc_n);
  gc->add_option("--m", gc_m);
  gc->add_option("--seed", gc_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      cfg.experiment = pam::parse_experiment(experiment);
      if (!mode.empty()) cfg.mode = pam::parse_mode(mode);
      cfg.out_dir = out;
      cfg.validate();
      return cmd_run(cfg);
    }
    if (*rep) return cmd_report(trace_path);
    return cmd_gradcheck(gc_experiment, gc_n, gc_m, gc_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
