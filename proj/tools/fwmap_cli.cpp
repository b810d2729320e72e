// Command-line front end: fwmap solve <instance> --type {mrf,tomo,gm} ...

#include <cstdio>
#include <exception>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fwmap/fwmap.hpp"

namespace {

struct Args {
  std::string instance;
  std::string type = "mrf";
  std::string solver = "fwmap";
  double budget_s = 600.0;
  std::uint64_t seed = 0;
  std::optional<double> prox_weight;
  std::string init_vertex = "min";
  bool fast_conv = false;
  std::string trace;
  std::size_t max_iters = 0;
  std::string clock = "wall";
  std::optional<double> gap_eps;
};

fwmap::Decomposition load(const Args& a) {
  const std::string text = fwmap::read_file(a.instance);
  if (a.type == "mrf") return fwmap::encode_mrf(fwmap::parse_mrf(text));
  if (a.type == "tomo")
    return fwmap::build_tomography_decomposition(
        fwmap::parse_tomography(text), a.fast_conv ? fwmap::ConvolutionMode::pruned : fwmap::ConvolutionMode::naive);
  return fwmap::build_matching_decomposition(fwmap::parse_graph_matching(text));
}

const char* reason_name(fwmap::StopReason r) {
  switch (r) {
    case fwmap::StopReason::budget: return "budget";
    case fwmap::StopReason::iteration_cap: return "iteration-cap";
    case fwmap::StopReason::gap: return "gap";
    case fwmap::StopReason::optimal: return "optimal";
  }
  return "?";
}

int run_solve(const Args& a) {
  const fwmap::Decomposition d = load(a);
  const auto clock = a.clock == "work" ? fwmap::ClockMode::work : fwmap::ClockMode::wall;
  fwmap::SolveResult res;
  if (a.solver == "fwmap") {
    fwmap::SolveOptions opts;
    opts.budget_s = a.budget_s;
    opts.max_iterations = a.max_iters;
    opts.prox_weight = a.prox_weight;
    opts.seed = a.seed;
    opts.init = a.init_vertex == "max" ? fwmap::InitVertex::max : fwmap::InitVertex::min;
    opts.clock = clock;
    if (a.gap_eps) {
      opts.gap_stop = true;
      opts.gap_eps_a = opts.gap_eps_b = *a.gap_eps;
    }
    res = fwmap::solve(d, opts);
  } else {
    fwmap::SubgradientOptions opts;
    opts.budget_s = a.budget_s;
    opts.max_steps = a.max_iters;
    opts.clock = clock;
    res = fwmap::solve_subgradient(d, opts);
  }
  if (!a.trace.empty()) fwmap::write_trace(res.trace, a.trace);
  std::printf("solver %s\nterms %zu\nvariables %zu\niterations %zu\nstop %s\nlower_bound %s\n", a.solver.c_str(),
              d.num_terms(), d.num_vars(), res.iterations, reason_name(res.reason),
              fwmap::format_real(res.h_best).c_str());
  if (a.solver == "fwmap")
    std::printf("prox_weight %s\nA %s\nB %s\n", fwmap::format_real(res.prox_weight).c_str(),
                fwmap::format_real(res.final_gap.a).c_str(), fwmap::format_real(res.final_gap.b).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lagrangean-decomposition lower bounds via proximal multi-plane Frank-Wolfe"};
  app.require_subcommand(1);
  Args args;

  auto* solve = app.add_subcommand("solve", "compute a lower bound for an instance");
  solve->add_option("instance", args.instance, "instance file")->required()->check(CLI::ExistingFile);
  solve->add_option("--type", args.type, "instance format")
      ->check(CLI::IsMember({"mrf", "tomo", "gm"}))
      ->capture_default_str();
  solve->add_option("--solver", args.solver, "fwmap or sa (Polyak subgradient)")
      ->check(CLI::IsMember({"fwmap", "sa"}))
      ->capture_default_str();
  solve->add_option("--budget-s", args.budget_s, "time budget in seconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  solve->add_option("--seed", args.seed, "random seed for the term order")->capture_default_str();
  solve->add_option("--prox-weight", args.prox_weight, "proximal weight c (default 1500000/(|T|+22)^2)")
      ->check(CLI::PositiveNumber);
  solve->add_option("--init-vertex", args.init_vertex, "initial vertex per term")
      ->check(CLI::IsMember({"min", "max"}))
      ->capture_default_str();
  solve->add_flag("--fast-conv", args.fast_conv, "pruned (min,+) convolution in projection oracles");
  solve->add_option("--trace", args.trace, "CSV trace output path");
  solve->add_option("--max-iters", args.max_iters, "iteration cap, 0 for none")->capture_default_str();
  solve->add_option("--clock", args.clock, "wall time or deterministic work units")
      ->check(CLI::IsMember({"wall", "work"}))
      ->capture_default_str();
  solve->add_option("--gap-eps", args.gap_eps, "stop when both gap quantities fall below this value")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    return run_solve(args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
