// aaslab: command-line driver for the instance-generation / algorithm-selection pipeline.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "aaslab/aaslab.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::size_t> jobs;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out;
  bool resume = false;
  bool desk_scale = false;
  bool quiet = false;
};

aaslab::ExperimentConfig resolve_config(const GlobalOptions& g) {
  aaslab::ExperimentConfig base = g.desk_scale ? aaslab::desk_scale_config() : aaslab::full_scale_config();
  aaslab::ExperimentConfig cfg = g.config_path.empty() ? base : aaslab::load_config(g.config_path, base);
  if (g.seed_override) cfg.apply_seed(*g.seed_override);
  if (g.out) cfg.output_dir = *g.out;
  if (g.jobs) cfg.jobs = *g.jobs;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate affine benchmark suites, compute landscape features, run an optimizer portfolio and "
               "train/evaluate algorithm selectors."};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--jobs", g.jobs, "Worker threads (outputs do not depend on this)")->check(CLI::PositiveNumber);
  app.add_option("--seed-override", g.seed_override, "Replace the master seed");
  app.add_option("--out", g.out, "Output directory (overrides output_dir)");
  app.add_flag("--resume", g.resume, "Continue an interrupted portfolio run from its checkpoint");
  app.add_flag("--desk-scale", g.desk_scale, "Start from the desk-scale preset instead of the full-scale defaults");
  app.add_flag("-q,--quiet", g.quiet, "No progress output");

  struct Verb {
    const char* name;
    const char* help;
  };
  const Verb verbs[] = {
      {"generate", "Generate the problem suite and cache component scale factors"},
      {"features", "Compute, prune and normalize landscape features"},
      {"run", "Run the optimizer portfolio and write the performance table"},
      {"select", "Build random, greedy and component instance sets"},
      {"train", "Train one selector per instance set"},
      {"evaluate", "Cross-evaluate selectors and aggregate gap closure"},
      {"report", "Write powerset, projection and summary tables and SVG plots"},
      {"all", "Run every stage in order"},
      {"show-config", "Print the resolved configuration and stage hashes"},
  };
  for (const auto& v : verbs) app.add_subcommand(v.name, v.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const auto cfg = resolve_config(g);
    aaslab::pipeline::Context ctx(cfg, cfg.jobs, g.resume, g.quiet ? nullptr : &std::cerr);
    const std::string verb = app.get_subcommands().front()->get_name();
    if (verb == "show-config") {
      auto j = aaslab::to_json(cfg);
      j["stage_hashes"] = {{"generate", ctx.hashes.generate}, {"features", ctx.hashes.features},
                           {"run", ctx.hashes.run},           {"select", ctx.hashes.select},
                           {"train", ctx.hashes.train},       {"evaluate", ctx.hashes.evaluate}};
      std::cout << j.dump(2) << "\n";
    } else if (verb == "generate") {
      aaslab::pipeline::cmd_generate(ctx);
    } else if (verb == "features") {
      aaslab::pipeline::cmd_features(ctx);
    } else if (verb == "run") {
      aaslab::pipeline::cmd_run(ctx);
    } else if (verb == "select") {
      aaslab::pipeline::cmd_select(ctx);
    } else if (verb == "train") {
      aaslab::pipeline::cmd_train(ctx);
    } else if (verb == "evaluate") {
      aaslab::pipeline::cmd_evaluate(ctx);
    } else if (verb == "report") {
      aaslab::pipeline::cmd_report(ctx);
    } else if (verb == "all") {
      aaslab::pipeline::run_all(ctx);
    }
  } catch (const aaslab::Error& e) {
    std::cerr << "aaslab: " << e.what() << "\n";
    return aaslab::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "aaslab: unexpected failure: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
