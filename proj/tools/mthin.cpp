#include "mthin/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Common {
  std::string config;
  std::string out;
  std::string job;
  bool no_timestamp = false;
  bool consistency = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("config", c.config, "JSON config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", c.out, "output directory (overrides the config)");
  cmd->add_option("-j,--job", c.job, "run only the named job");
  cmd->add_flag("--no-timestamp", c.no_timestamp, "omit generated_at from reports");
}

int execute(const Common& c, std::set<std::string> commands) {
  using namespace mthin::cli;
  try {
    const RunConfig cfg = load_config(c.config);
    RunOptions opt;
    opt.commands = std::move(commands);
    if (!c.out.empty()) opt.output_dir = c.out;
    if (!c.job.empty()) opt.job = c.job;
    if (c.no_timestamp) opt.timestamp = false;
    const auto outcomes = run_jobs(cfg, opt);
    if (outcomes.empty()) {
      std::cerr << "error: no matching jobs in " << c.config << "\n";
      return 2;
    }
    for (const auto& oc : outcomes) {
      if (oc.exit_code == 0) {
        std::cerr << "job " << oc.name << ": ok";
        for (const auto& f : oc.files) std::cerr << " " << f;
        std::cerr << "\n";
        if (oc.command == "criterion") std::cout << oc.name << ": " << oc.report["result"]["verdict"].get<std::string>() << "\n";
      } else {
        std::cerr << "job " << oc.name << ": error (exit " << oc.exit_code << "): " << oc.message << "\n";
      }
    }
    if (c.consistency)
      for (const auto& line : consistency_lines(outcomes)) std::cout << line << "\n";
    return exit_code(outcomes);
  } catch (const mthin::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimal thinness toolkit: Whitney decompositions, capacities and thinness criteria"};
  app.require_subcommand(1);

  Common c;
  auto* run = app.add_subcommand("run", "run every job in a config");
  add_common(run, c);
  run->add_flag("--consistency", c.consistency, "print cross-method agreement lines");

  auto* decompose = app.add_subcommand("decompose", "Whitney decomposition jobs (CSV of cubes)");
  add_common(decompose, c);

  auto* capacity = app.add_subcommand("capacity", "capacity jobs");
  capacity->require_subcommand(1);
  auto* ball = capacity->add_subcommand("ball", "ball capacity sweeps");
  add_common(ball, c);
  auto* cset = capacity->add_subcommand("set", "capacity of declared sets");
  add_common(cset, c);

  auto* energy = app.add_subcommand("energy", "Green energy jobs");
  energy->require_subcommand(1);
  auto* gamma = energy->add_subcommand("gamma", "gamma_u of declared sets");
  add_common(gamma, c);

  auto* criterion = app.add_subcommand("criterion", "thinness criteria");
  criterion->require_subcommand(1);
  auto* crun = criterion->add_subcommand("run", "run criterion jobs");
  add_common(crun, c);
  crun->add_flag("--consistency", c.consistency, "print cross-method agreement lines");

  auto* kernel = app.add_subcommand("kernel", "kernel envelopes");
  kernel->require_subcommand(1);
  auto* keval = kernel->add_subcommand("eval", "evaluate envelopes at given points (CSV)");
  add_common(keval, c);

  auto* scaling = app.add_subcommand("scaling", "scaling profiles");
  scaling->require_subcommand(1);
  auto* scheck = scaling->add_subcommand("check", "verify declared weak scaling indices");
  add_common(scheck, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*run) return execute(c, {});
  if (*decompose) return execute(c, {"decompose"});
  if (*ball) return execute(c, {"capacity_ball"});
  if (*cset) return execute(c, {"capacity_set"});
  if (*gamma) return execute(c, {"energy_gamma"});
  if (*crun) return execute(c, {"criterion"});
  if (*keval) return execute(c, {"kernel_eval"});
  if (*scheck) return execute(c, {"scaling_check"});
  return 2;
}
