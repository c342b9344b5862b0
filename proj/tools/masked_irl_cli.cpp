#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "masked_irl/errors.hpp"
#include "masked_irl/pipeline.hpp"

using namespace masked_irl;

namespace {

std::string flag_name(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return "--" + key;
}

struct Overrides {
  std::string config_file;
  std::map<std::string, std::string> values;
};

/// Adds --config plus one flag per config key.
void add_config_flags(CLI::App* app, Overrides& o) {
  app->add_option("-c,--config", o.config_file, "key = value config file")->check(CLI::ExistingFile);
  for (const auto& key : RunConfig::keys()) {
    app->add_option_function<std::string>(
        flag_name(key), [&o, key](const std::string& v) { o.values[key] = v; }, "config key " + key);
  }
}

RunConfig resolve(const Overrides& o) {
  RunConfig config = o.config_file.empty() ? RunConfig{} : load_run_config(o.config_file);
  for (const auto& [key, value] : o.values) config.set(key, value);
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked IRL: language-conditioned reward learning with state-relevance masks"};
  app.require_subcommand(1);

  Overrides gen_o, ann_o, train_o, eval_o;
  auto* gen = app.add_subcommand("gen-data", "sample banks, preferences and demonstrations");
  add_config_flags(gen, gen_o);

  auto* annotate = app.add_subcommand("annotate", "predict masks and disambiguate instructions");
  add_config_flags(annotate, ann_o);

  auto* train = app.add_subcommand("train", "pretrain (and optionally fine-tune) a reward model");
  add_config_flags(train, train_o);
  bool resume = false;
  train->add_flag("--resume", resume, "continue from the run's checkpoint");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the held-out bank");
  add_config_flags(eval, eval_o);
  std::string stub, checkpoint;
  eval->add_option("--stub", stub, "evaluate a reference reward instead: gt, neg_gt or random");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file (default: the run's)");

  auto* report = app.add_subcommand("report", "merge eval results of several runs");
  std::vector<std::string> runs;
  std::string report_out;
  report->add_option("runs", runs, "run directories holding eval outputs")->required();
  report->add_option("-o,--out", report_out, "output directory")->required();

  auto* show = app.add_subcommand("show-config", "print the resolved config");
  Overrides show_o;
  add_config_flags(show, show_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const RunConfig config = resolve(gen_o);
      cmd_gen_data(config);
      std::cout << "wrote data to " << config.out.string() << '\n';
    } else if (*annotate) {
      const RunConfig config = resolve(ann_o);
      const std::size_t failed = cmd_annotate(config);
      if (failed > 0) {
        std::cerr << failed << " annotation(s) failed; see " << RunFiles(config.out).annotation_failures.string()
                  << '\n';
        return 2;
      }
    } else if (*train) {
      const RunConfig config = resolve(train_o);
      const TrainingState state = cmd_train(config, resume);
      if (!state.log.epochs.empty()) {
        const auto& last = state.log.epochs.back();
        std::cout << "final " << last.phase << " epoch " << last.epoch << ": total loss " << last.total_loss
                  << '\n';
      }
    } else if (*eval) {
      const RunConfig config = resolve(eval_o);
      const EvalReport r = cmd_eval(config, stub.empty() ? std::nullopt : std::optional<std::string>(stub),
                                    checkpoint.empty() ? std::nullopt
                                                       : std::optional<std::filesystem::path>(checkpoint));
      std::cout << r.rows_csv();
    } else if (*report) {
      std::vector<std::filesystem::path> dirs(runs.begin(), runs.end());
      cmd_report(dirs, report_out);
    } else if (*show) {
      std::cout << resolve(show_o).to_text();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
