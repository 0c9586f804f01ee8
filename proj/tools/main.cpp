#include <CLI11.hpp>
#include <iostream>

#include "pairsynth/cli.hpp"

using namespace pairsynth;

int main(int argc, char** argv) {
  CLI::App app{"pairsynth: synthesis of concurrent programs from pairwise specifications"};
  app.require_subcommand(1);

  std::string file, report, pair_arg, outdir = "out", trace_out, lin_out, mode = "stepper";
  std::string strict_csv, prev_spec, gen_out = "system.json";
  std::uint64_t seed = 1;
  std::size_t steps = 10000, bound = 5000, max_states = cli::default_budget();
  std::size_t n = 4, ops = 3, replicas = 2, clients = 2;
  bool dot = false, analyze_static = false, analyze_dynamic = false;

  auto* validate = app.add_subcommand("validate", "check system-file invariants");
  validate->add_option("file", file)->required();
  validate->add_option("--report", report, "write a JSON report");

  auto* check_pair = app.add_subcommand("check-pair", "verify one pair-program");
  check_pair->add_option("file", file)->required();
  check_pair->add_option("--pair", pair_arg, "pair as <i>,<j>")->required();
  check_pair->add_option("--report", report);

  auto* synthesize = app.add_subcommand("synthesize", "compose the static program");
  synthesize->add_option("file", file)->required();
  synthesize->add_option("-o,--out", outdir, "output directory");
  synthesize->add_flag("--dot", dot, "emit pair-structure DOT files");
  synthesize->add_option("--report", report);

  auto* analyze = app.add_subcommand("analyze", "wait-for-graph conditions");
  analyze->add_option("file", file)->required();
  analyze->add_flag("--static", analyze_static, "static condition");
  analyze->add_flag("--dynamic", analyze_dynamic, "dynamic condition");
  analyze->add_option("--bound", bound, "configuration bound for --dynamic");
  analyze->add_option("--report", report);

  auto* oracle = app.add_subcommand("oracle", "full product cross-checks");
  oracle->add_option("file", file)->required();
  oracle->add_option("--max-states", max_states, "product state budget");
  oracle->add_option("--report", report);

  auto* simulate = app.add_subcommand("simulate", "fair-scheduled simulation");
  simulate->add_option("file", file)->required();
  simulate->add_option("--seed", seed);
  simulate->add_option("--steps", steps);
  simulate->add_option("--trace", trace_out, "trace file to write");
  simulate->add_option("--report", report);

  auto* lowatom = app.add_subcommand("run-lowatom", "lock-based low-atomicity run");
  lowatom->add_option("file", file)->required();
  lowatom->add_option("--seed", seed);
  lowatom->add_option("--agents-mode", mode, "stepper|free");
  lowatom->add_option("--lin", lin_out, "linearization record file");
  lowatom->add_option("--report", report);

  auto* gen = app.add_subcommand("gen", "emit a corpus system file");
  auto* gen_tp = gen->add_subcommand("twophase", "ring two-phase commit");
  gen_tp->add_option("--n", n, "ring size");
  gen_tp->add_option("-o,--out", gen_out)->required();
  auto* gen_esds = gen->add_subcommand("esds", "eventually-serializable data service");
  gen_esds->add_option("--ops", ops);
  gen_esds->add_option("--replicas", replicas);
  gen_esds->add_option("--clients", clients);
  gen_esds->add_option("--strict", strict_csv, "comma-separated op indices");
  gen_esds->add_option("--prev", prev_spec, "k:i,j;... predecessor lists");
  gen_esds->add_option("-o,--out", gen_out)->required();
  gen->require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cli::cmd_validate(file, report);
    if (*check_pair) return cli::cmd_check_pair(file, pair_arg, report);
    if (*synthesize) return cli::cmd_synthesize(file, outdir, dot, report);
    if (*analyze) {
      if (analyze_static == analyze_dynamic)
        throw InputError("analyze needs exactly one of --static / --dynamic");
      return cli::cmd_analyze(file, analyze_dynamic, bound, report);
    }
    if (*oracle) return cli::cmd_oracle(file, max_states, report);
    if (*simulate) return cli::cmd_simulate(file, seed, steps, trace_out, report);
    if (*lowatom) return cli::cmd_run_lowatom(file, seed, mode, lin_out, report);
    if (*gen_tp) return cli::cmd_gen_twophase(n, gen_out);
    if (*gen_esds)
      return cli::cmd_gen_esds(ops, replicas, clients, strict_csv, prev_spec, gen_out);
  } catch (const BudgetExceeded& ex) {
    std::cerr << "budget refused: " << ex.what() << "\n";
    return cli::kBudget;
  } catch (const InputError& ex) {
    std::cerr << "input error: " << ex.what() << "\n";
    return cli::kInputError;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return cli::kFail;
  }
  return cli::kInputError;
}
