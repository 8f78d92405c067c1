#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pulse/commands.hpp"

namespace {

void add_common(CLI::App* app, pulse::CommonOptions& common, bool out_required) {
  app->add_option("--config", common.config, "run configuration file");
  app->add_option("--seed", common.seed, "override the data and training seed");
  auto* out = app->add_option("--out", common.out, "output directory");
  if (out_required) out->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pulsessl: semi-supervised remote pulse estimation"};
  app.require_subcommand(1);

  pulse::CommonOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  add_common(gen_cmd, gen, true);

  pulse::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "train under one protocol");
  add_common(train_cmd, train.common, true);
  train_cmd->add_option("--protocol", train.protocol, "full, partial or semi")
      ->check(CLI::IsMember({"full", "partial", "semi"}));
  train_cmd->add_option("--schedule", train.schedule, "inc, dec or fixed:<ratio>");
  train_cmd->add_option("--criterion", train.criterion, "snr or ipr");
  train_cmd->add_option("--data", train.data, "dataset directory holding manifest.csv");

  std::string score_input;
  auto* score_cmd = app.add_subcommand("score", "score signals: class, SNR and IPR");
  score_cmd->add_option("--input", score_input, "signals CSV or run directory")->required();

  pulse::AblateOptions ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "sweep one hyperparameter over seeds");
  add_common(ablate_cmd, ablate.common, true);
  ablate_cmd->add_option("--axis", ablate.axis, "schedule, criterion, lambda or e_pre")
      ->required();
  ablate_cmd->add_option("--data", ablate.data, "dataset directory holding manifest.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pulse::kExitConfig;
  }

  if (*gen_cmd) return pulse::cmd_gen(gen, std::cout, std::cerr);
  if (*train_cmd) return pulse::cmd_train(train, std::cout, std::cerr);
  if (*score_cmd) return pulse::cmd_score(score_input, std::cout, std::cerr);
  if (*ablate_cmd) return pulse::cmd_ablate(ablate, std::cout, std::cerr);
  return pulse::kExitConfig;
}
