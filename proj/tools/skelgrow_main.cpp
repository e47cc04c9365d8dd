#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "skelgrow/commands.hpp"
#include "skelgrow/errors.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"skelgrow: adaptive skeleton-extension fitting for point trajectories"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string model_path;
  std::string overrides_path;
  std::string scene_path;
  std::optional<std::uint64_t> seed;

  CLI::App* generate = app.add_subcommand("generate", "Generate a synthetic scene");
  generate->add_option("--config", config_path, "Scene spec JSON")->required();
  generate->add_option("--out", out_path, "Output directory")->required();
  generate->add_option("--seed", seed, "Override the spec seed");

  CLI::App* train = app.add_subcommand("train", "Fit a model to a scene");
  train->add_option("--config", config_path, "Run configuration JSON")->required();
  train->add_option("--out", out_path, "Override the configured output directory");
  train->add_option("--seed", seed, "Override the configured seed");

  CLI::App* animate = app.add_subcommand("animate", "Replay with explicit grown-joint rotations");
  animate->add_option("--model", model_path, "Trained model JSON")->required();
  animate->add_option("--overrides", overrides_path, "Explicit rotations JSON")->required();
  animate->add_option("--out", out_path, "Output directory")->required();

  CLI::App* eval = app.add_subcommand("eval", "Score a trained model against a scene");
  eval->add_option("--model", model_path, "Trained model JSON")->required();
  eval->add_option("--scene", scene_path, "Scene JSON")->required();
  eval->add_option("--out", out_path, "Output report path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : skelgrow::kExitValidation;
  }

  if (generate->parsed()) {
    skelgrow::cmd_generate(config_path, out_path, seed);
  } else if (train->parsed()) {
    std::optional<std::filesystem::path> out;
    if (!out_path.empty()) out = out_path;
    skelgrow::cmd_train(config_path, out, seed);
  } else if (animate->parsed()) {
    skelgrow::cmd_animate(model_path, overrides_path, out_path);
  } else if (eval->parsed()) {
    skelgrow::cmd_eval(model_path, scene_path, out_path);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const skelgrow::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return skelgrow::kExitValidation;
  } catch (const skelgrow::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return skelgrow::kExitNumeric;
  } catch (const skelgrow::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return skelgrow::kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
