#include <exception>
#include <functional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ada/errors.hpp"
#include "commands.hpp"

namespace {

using namespace ada::tools;

void add_common(CLI::App* cmd, CommonOptions& c) {
  cmd->add_option("--config", c.config, "Run config (key = value lines)");
  cmd->add_option("--seed", c.seed, "Root seed; overrides the config");
  cmd->add_option("--epsilon", c.epsilon, "L-inf budget in --epsilon-scale units; overrides the config");
  cmd->add_option("--epsilon-scale", c.epsilon_scale, "Scale of --epsilon and the config epsilon")
      ->check(CLI::IsMember({"0-255", "0-1"}));
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--models", c.models, "Model zoo directory")->capture_default_str();
  cmd->add_option("--channels", c.channels, "Image channels of archive inputs")->capture_default_str();
  cmd->add_option("--size", c.size, "Image side length")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-conditioned adversarial perturbation generator and transfer-attack harness"};
  app.require_subcommand(1);
  CommonOptions common;
  std::function<int()> run;

  MakeDataOptions make_data;
  auto* md = app.add_subcommand("make-data", "Write a procedural toy-shapes dataset");
  add_common(md, common);
  md->add_option("--count", make_data.count)->capture_default_str();
  md->add_option("--classes", make_data.classes)->capture_default_str();
  md->add_option("--noise", make_data.noise)->capture_default_str();
  md->add_option("--format", make_data.format, "dir or archive")->capture_default_str();
  md->callback([&] { run = [&] { return cmd_make_data(common, make_data); }; });

  TrainClsOptions train_cls;
  auto* tc = app.add_subcommand("train-cls", "Train a toy classifier into the model zoo");
  add_common(tc, common);
  tc->add_option("--data", train_cls.data)->required();
  tc->add_option("--arch", train_cls.arch, "cnn-a, cnn-b or linear")->capture_default_str();
  tc->add_option("--id", train_cls.id)->required();
  tc->add_option("--classes", train_cls.classes)->capture_default_str();
  tc->callback([&] { run = [&] { return cmd_train_cls(common, train_cls); }; });

  TrainGenOptions train_gen;
  auto* tg = app.add_subcommand("train-gen", "Train the perturbation generator against a surrogate");
  add_common(tg, common);
  tg->add_option("--data", train_gen.data)->required();
  tg->add_option("--surrogate", train_gen.surrogate)->required();
  tg->callback([&] { run = [&] { return cmd_train_gen(common, train_gen); }; });

  AttackOptions attack;
  auto* at = app.add_subcommand("attack", "Craft adversarial images with a baseline or a generator");
  add_common(at, common);
  at->add_option("--data", attack.data)->required();
  at->add_option("--attack", attack.attack, "Baseline name, id=generator.ckpt, or a checkpoint path")->required();
  at->add_option("--surrogate", attack.surrogate)->required();
  at->callback([&] { run = [&] { return cmd_attack(common, attack); }; });

  EvalOptions eval;
  auto* ev = app.add_subcommand("eval", "Transfer matrix of attacks over target models");
  add_common(ev, common);
  ev->add_option("--data", eval.data)->required();
  ev->add_option("--attack", eval.attacks)->delimiter(',');
  ev->add_option("--adv", eval.adv, "Directory written by the attack command")->delimiter(',');
  ev->add_option("--surrogate", eval.surrogates)->delimiter(',');
  ev->add_option("--targets", eval.targets, "Default: every model in the zoo")->delimiter(',');
  ev->callback([&] { run = [&] { return cmd_eval(common, eval); }; });

  SweepOptions sweep;
  auto* sw = app.add_subcommand("sweep", "ASR as a function of epsilon or a loss weight");
  add_common(sw, common);
  sw->add_option("--data", sweep.data)->required();
  sw->add_option("--train-data", sweep.train_data, "Generator training set for --attack ada");
  sw->add_option("--param", sweep.parameter, "epsilon, lambda_attn or lambda_div")->capture_default_str();
  sw->add_option("--values", sweep.values, "Default: the standard grid")->delimiter(',');
  sw->add_option("--attack", sweep.attack, "Baseline, generator checkpoint, or ada (retrain per value)")
      ->capture_default_str();
  sw->add_option("--surrogate", sweep.surrogate)->required();
  sw->add_option("--targets", sweep.targets)->delimiter(',');
  sw->callback([&] { run = [&] { return cmd_sweep(common, sweep); }; });

  AnalyzeOptions analyze;
  auto* an = app.add_subcommand("analyze", "Feature-space spread of adversarial examples");
  add_common(an, common);
  an->add_option("--data", analyze.data)->required();
  an->add_option("--attack", analyze.attacks)->delimiter(',')->required();
  an->add_option("--surrogate", analyze.surrogate)->required();
  an->add_option("--targets", analyze.targets)->delimiter(',');
  an->add_option("--codes", analyze.codes, "Latent codes per image")->capture_default_str();
  an->add_option("--count", analyze.count, "Use the first N images (0 = all)")->capture_default_str();
  an->callback([&] { run = [&] { return cmd_analyze(common, analyze); }; });

  AdvTrainOptions adv_train;
  auto* av = app.add_subcommand("adv-train", "Adversarial training, optionally followed by a robustness table");
  add_common(av, common);
  av->add_option("--data", adv_train.data)->required();
  av->add_option("--test-data", adv_train.test_data);
  av->add_option("--arch", adv_train.arch)->capture_default_str();
  av->add_option("--train-attack", adv_train.train_attacks, "none, a baseline, or a generator")
      ->delimiter(',')
      ->required();
  av->add_option("--eval-attack", adv_train.eval_attacks)->delimiter(',');
  av->add_option("--clean-model", adv_train.clean_model, "Model the eval attacks are crafted on");
  av->add_option("--classes", adv_train.classes)->capture_default_str();
  av->callback([&] { run = [&] { return cmd_adv_train(common, adv_train); }; });

  ExportAttentionOptions export_attention;
  auto* ea = app.add_subcommand("export-attention", "Write attention heatmaps of a classifier");
  add_common(ea, common);
  ea->add_option("--data", export_attention.data)->required();
  ea->add_option("--surrogate", export_attention.surrogate)->required();
  ea->add_option("--count", export_attention.count)->capture_default_str();
  ea->callback([&] { run = [&] { return cmd_export_attention(common, export_attention); }; });

  CLI11_PARSE(app, argc, argv);
  try {
    return run();
  } catch (const ada::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
  }
  return 1;
}
