#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "calibra/errors.hpp"
#include "commands.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out = ".";
  bool quiet = false;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config, "JSON run configuration")
      ->required();
  sub->add_option("--out", args.out, "output directory, created if missing");
  sub->add_flag("--quiet", args.quiet, "suppress the stdout summary");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "calibra: multicalibrated predictors for distributional properties "
      "(batch, joint, and online adversarial training with audits)"};
  app.require_subcommand(1);

  CommonArgs batch_args, joint_args, online_args, audit_args;
  std::string demo_which;

  add_common(app.add_subcommand("calibrate-batch",
                                "train a single-property predictor on an exact "
                                "dataset and audit it"),
             batch_args);
  add_common(app.add_subcommand("calibrate-joint",
                                "train a conditionally calibrated predictor pair"),
             joint_args);
  add_common(app.add_subcommand("simulate-online",
                                "run the adversarial online learner across seeds"),
             online_args);
  add_common(app.add_subcommand("audit",
                                "re-audit a persisted predictor against a dataset"),
             audit_args);
  app.add_subcommand("demo", "print a counterexample certificate")
      ->add_option("which", demo_which, "variance | cvar")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const CLI::App* sub = app.get_subcommands().at(0);
    const std::string name = sub->get_name();
    if (name == "calibrate-batch")
      return calibra::cli::cmd_calibrate_batch(batch_args.config, batch_args.out,
                                               batch_args.quiet);
    if (name == "calibrate-joint")
      return calibra::cli::cmd_calibrate_joint(joint_args.config, joint_args.out,
                                               joint_args.quiet);
    if (name == "simulate-online")
      return calibra::cli::cmd_simulate_online(online_args.config, online_args.out,
                                               online_args.quiet);
    if (name == "audit")
      return calibra::cli::cmd_audit(audit_args.config, audit_args.out,
                                     audit_args.quiet);
    if (name == "demo") return calibra::cli::cmd_demo(demo_which);
    std::cerr << "unknown subcommand " << name << "\n";
    return 1;
  } catch (const calibra::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const calibra::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
