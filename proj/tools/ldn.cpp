#include <cstdint>
#include <string>

#include <CLI11.hpp>

#include "ldn/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"latent denoising toolkit"};
  app.require_subcommand(1);

  std::string config_path, train_out;
  auto* train = app.add_subcommand("train", "run the toy training loop");
  train->add_option("--config", config_path, "run configuration file")->required();
  train->add_option("--out", train_out, "output directory");

  std::string corrupt_in, corrupt_out, family = "noise";
  int severity = 3;
  std::uint64_t corrupt_seed = 0;
  auto* corrupt = app.add_subcommand("corrupt", "corrupt a directory of P6 images");
  corrupt->add_option("--in", corrupt_in, "input directory")->required();
  corrupt->add_option("--out", corrupt_out, "output directory")->required();
  corrupt->add_option("--family", family, "noise|blur|weather|digital")->required();
  corrupt->add_option("--severity", severity, "severity 1..5")->required();
  corrupt->add_option("--seed", corrupt_seed, "protocol seed");

  std::string dump_path, reference_path, mode, analyze_out;
  auto* analyze = app.add_subcommand("analyze", "analyze a feature dump");
  analyze->add_option("--dump", dump_path, "feature dump file")->required();
  analyze->add_option("--reference", reference_path, "reference dump (cka mode)");
  analyze->add_option("--mode", mode, "cka|knn|rank|spectrum")->required();
  analyze->add_option("--out", analyze_out, "write the report here instead of stdout");

  std::uint64_t gradcheck_seed = 0;
  bool inject = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "verify gradients by finite differences");
  gradcheck->add_option("--seed", gradcheck_seed, "seed for the random instances");
  gradcheck->add_flag("--inject-sign-error", inject, "flip one gradient sign (self test)")
      ->group("");  // hidden: exists to prove the harness can fail

  std::string metrics_path, plot_out;
  auto* plot = app.add_subcommand("plot", "render a metrics CSV as a static SVG");
  plot->add_option("--metrics", metrics_path, "metrics CSV")->required();
  plot->add_option("--out", plot_out, "output SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ldn::kExitUsage;
  }

  if (train->parsed()) return ldn::cmd_train(config_path, train_out);
  if (corrupt->parsed())
    return ldn::cmd_corrupt(corrupt_in, corrupt_out, family, severity, corrupt_seed);
  if (analyze->parsed()) return ldn::cmd_analyze(dump_path, mode, reference_path, analyze_out);
  if (gradcheck->parsed()) return ldn::cmd_gradcheck(gradcheck_seed, inject);
  if (plot->parsed()) return ldn::cmd_plot(metrics_path, plot_out);
  return ldn::kExitUsage;
}
