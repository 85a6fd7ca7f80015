#include "vpt/cli.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vpt/commands.hpp"
#include "vpt/errors.hpp"

namespace vpt {

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  std::optional<std::string> preset;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "JSON experiment config (defaults apply to missing keys)");
  cmd->add_option("--seed", flags.seed, "Use this single seed instead of the config's seed list");
  cmd->add_option("--out", flags.out, "Output root directory");
  cmd->add_flag("--force", flags.force, "Replace existing output directories");
  cmd->add_option("--preset", flags.preset, "Default set: desk or paper")->check(CLI::IsMember({"desk", "paper"}));
}

ExperimentConfig resolve(const CommonFlags& flags) {
  ExperimentConfig cfg = flags.config.empty() ? parse_config("{}", flags.preset) : load_config(flags.config, flags.preset);
  if (flags.seed) cfg.seeds = {*flags.seed};
  if (!flags.out.empty()) cfg.out = flags.out;
  return cfg;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Visual prompting toolkit: pretrain, adapt and analyze frozen image models", "vpt"};
  app.require_subcommand(1);

  CommonFlags pre_flags, run_flags, abl_flags, ana_flags;
  std::string method, axis, prompt_dir, image_path, dataset;

  auto* pre = app.add_subcommand("pretrain", "Build, pretrain and freeze a backbone checkpoint");
  add_common(pre, pre_flags);

  auto* run = app.add_subcommand("run", "Adapt the frozen backbone to the configured dataset");
  add_common(run, run_flags);
  run->add_option("--method", method, "tp, vp, lp or ft")->required()->check(CLI::IsMember({"tp", "vp", "lp", "ft"}));
  run->add_option("--dataset", dataset, "Dataset suite, overriding the config");

  auto* abl = app.add_subcommand("ablate", "Sweep one axis and write a report with a plot");
  add_common(abl, abl_flags);
  abl->add_option("--axis", axis, "template, mapping or sigma")
      ->required()
      ->check(CLI::IsMember({"template", "mapping", "sigma"}));

  auto* ana = app.add_subcommand("analyze", "Relate prompting gains to distribution distance and diversity");
  add_common(ana, ana_flags);

  auto* exp = app.add_subcommand("export-prompt", "Render a saved prompt as a PPM image");
  exp->add_option("--prompt", prompt_dir, "Prompt directory written by 'run --method vp'")->required();
  exp->add_option("--out", image_path, "Image file to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (pre->parsed()) {
      const auto cfg = resolve(pre_flags);
      const auto dir = cmd_pretrain(cfg, pre_flags.force);
      out << "checkpoint: " << dir.string() << "\nconfig hash: " << config_hash(cfg) << "\n";
    } else if (run->parsed()) {
      auto cfg = resolve(run_flags);
      if (!dataset.empty()) cfg.dataset = dataset;
      const auto r = cmd_run(cfg, method, run_flags.force);
      out << r.method << " on " << r.dataset << ": train " << percent(r.train_acc) << ", test "
          << percent(r.test_acc) << "\n";
    } else if (abl->parsed()) {
      const auto dir = cmd_ablate(resolve(abl_flags), axis, abl_flags.force);
      out << "report: " << (dir / "report.csv").string() << "\n";
    } else if (ana->parsed()) {
      const auto dir = cmd_analyze(resolve(ana_flags));
      out << "analysis: " << (dir / "analysis.csv").string() << "\n";
    } else if (exp->parsed()) {
      cmd_export_prompt(prompt_dir, image_path);
      out << "wrote " << image_path << "\n";
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace vpt
