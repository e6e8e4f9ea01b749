#include <CLI11.hpp>

#include "jamshield/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"link-level anti-jamming simulator, trainer, and evaluator"};
  app.require_subcommand(1);

  jamshield::pipeline::CliOptions opt;
  unsigned long long seed = 0;

  const char* names[] = {"simulate", "train", "evaluate", "detect-train",
                         "report"};
  const char* descs[] = {
      "roll out baseline episodes and write per-slot KPI traces",
      "train the two-agent recovery policy and write a checkpoint",
      "replay a trained checkpoint deterministically and score it",
      "fit the jamming detector on simulator-labeled windows",
      "collect curves and KPI traces under --out into an HTML report"};
  std::vector<CLI::App*> subs;
  for (int i = 0; i < 5; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], descs[i]);
    sub->add_option("--config", opt.config_path, "TOML configuration file")
        ->required();
    sub->add_option("--out", opt.out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "override the configured master seed");
    sub->add_option("--variant", opt.variant,
                    "policy variant: ippo, mappo, or mappo-det");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* active = app.get_subcommands().front();
  opt.command = active->get_name();
  opt.has_seed = active->count("--seed") > 0;
  opt.seed = seed;
  return jamshield::pipeline::run_cli(opt);
}
