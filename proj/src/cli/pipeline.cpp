#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "masked_irl/errors.hpp"
#include "masked_irl/pipeline.hpp"

namespace masked_irl {

using nlohmann::json;

std::pair<std::vector<PreferenceWeights>, std::vector<PreferenceWeights>> select_preferences(
    const RunConfig& config) {
  config.validate();
  const std::vector<PreferenceWeights> pool = config.preference_pool == PreferencePool::kAll
                                                  ? enumerate_preferences()
                                                  : sparse_distance_preferences();
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(stage_seed(config, "preferences"));
  rng.shuffle(order.begin(), order.end());
  const auto n_train = static_cast<std::size_t>(config.train_preferences);
  const auto n_test = static_cast<std::size_t>(config.test_preferences);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                                order.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  std::pair<std::vector<PreferenceWeights>, std::vector<PreferenceWeights>> out;
  for (auto i : train) out.first.push_back(pool[i]);
  for (auto i : test) out.second.push_back(pool[i]);
  return out;
}

GeneratedData generate_data(const RunConfig& config) {
  config.validate();
  GeneratedData data;
  Rng train_rng(stage_seed(config, "bank/train"));
  data.train_bank = build_bank(config.train_configs, config.pairs, config.perturbed, PerturbationSpec{}, train_rng,
                               Split::kTrain);
  Rng test_rng(stage_seed(config, "bank/test"));
  data.test_bank = build_bank(config.test_configs, config.pairs, config.perturbed, PerturbationSpec{}, test_rng,
                              Split::kTest);
  for (const auto& a : data.train_bank.configs) {
    for (const auto& b : data.test_bank.configs) {
      if (a == b) throw ValidationError("train and test banks share a config");
    }
  }
  std::tie(data.train_preferences, data.test_preferences) = select_preferences(config);
  Rng demo_rng(stage_seed(config, "demos/train"));
  data.train = generate_examples(data.train_preferences, data.train_bank, config.demo_spec(), demo_rng);
  if (!data.test_preferences.empty()) {
    Rng fine_tune_rng(stage_seed(config, "demos/fine_tune"));
    data.fine_tune = generate_examples(data.test_preferences, data.train_bank, config.demo_spec(), fine_tune_rng);
  }
  return data;
}

std::unique_ptr<ChatProvider> make_provider(const RunConfig& config, int round) {
  switch (config.provider) {
    case ProviderKind::kOracle: return nullptr;
    case ProviderKind::kMock: {
      const std::uint64_t base = stage_seed(config, "mock");
      const std::uint64_t seed = round == 0 ? base : derive_seed(base, static_cast<std::uint64_t>(round));
      return std::make_unique<MockAnnotator>(MockAnnotator::Options{config.mock_p_flip, config.mock_p_miss, seed});
    }
    case ProviderKind::kReplay: {
      // Replays whatever the configured model answered before.
      return std::make_unique<ReplayProvider>(config.llm_model);
    }
    case ProviderKind::kLive:
      return std::make_unique<HttpChatProvider>(
          HttpChatProvider::from_environment(config.llm_model, config.llm_base_url));
  }
  return nullptr;
}

AnnotationOutcome annotate_examples(const RunConfig& config, const std::vector<AnnotatedExample>& examples,
                                    const TrajectoryBank& bank, AnnotationCache* cache) {
  AnnotationOutcome outcome;
  if (config.provider == ProviderKind::kOracle) {
    outcome.examples = examples;
    return outcome;
  }
  const bool mock = config.provider == ProviderKind::kMock;
  auto client_for = [&](ChatProvider* provider, int round) {
    return LlmClient{provider, cache, config.llm_temperature, 3, mock ? 0 : round};
  };

  const auto base_provider = make_provider(config, 0);
  std::vector<AnnotatedExample> clear_masked = examples;
  std::vector<AnnotationFailure> clear_failures;
  {
    // Clear instructions first; ambiguous ones are handled below.
    std::vector<AnnotatedExample> clear;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (!examples[i].instruction.is_ambiguous() || !config.disambiguate) {
        clear.push_back(examples[i]);
        where.push_back(i);
      }
    }
    annotate_masks(clear, client_for(base_provider.get(), 0), &clear_failures);
    for (auto& f : clear_failures) f.example = where[f.example];
    for (std::size_t k = 0; k < clear.size(); ++k) clear_masked[where[k]] = std::move(clear[k]);
  }

  bool any_ambiguous = false;
  for (const auto& ex : examples) any_ambiguous = any_ambiguous || ex.instruction.is_ambiguous();
  if (!config.disambiguate || !any_ambiguous) {
    outcome.examples = std::move(clear_masked);
    outcome.failures = std::move(clear_failures);
    return outcome;
  }

  std::vector<Instruction> truth;
  std::vector<std::size_t> ambiguous_index;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].instruction.is_ambiguous()) {
      ambiguous_index.push_back(i);
      truth.push_back(render_instruction(examples[i].preference, InstructionMode::kClear));
    }
  }

  double best = -1.0;
  for (int round = 0; round < config.annotation_rounds; ++round) {
    const auto provider = round == 0 ? nullptr : make_provider(config, round);
    ChatProvider* p = round == 0 ? base_provider.get() : provider.get();
    std::vector<AnnotationFailure> failures;
    std::vector<std::vector<Instruction>> candidates;
    auto augmented = augment_with_disambiguations(clear_masked, bank, client_for(p, round), &failures, &candidates);
    std::vector<std::vector<Instruction>> per_query;
    for (auto i : ambiguous_index) per_query.push_back(candidates[i]);
    const double accuracy = instruction_accuracy(per_query, truth);
    outcome.round_accuracy.push_back(accuracy);
    if (accuracy > best) {
      best = accuracy;
      outcome.selected_round = round;
      outcome.examples = std::move(augmented);
      outcome.failures = clear_failures;
      outcome.failures.insert(outcome.failures.end(), failures.begin(), failures.end());
    }
  }
  return outcome;
}

namespace {

ModelShape shape_for(const LanguageEncoder& encoder) {
  ModelShape shape;
  shape.embed_dim = encoder.dim();
  return shape;
}

}  // namespace

TrainingState train_run(const RunConfig& config, const std::vector<AnnotatedExample>& train,
                        const std::vector<AnnotatedExample>& fine_tune, const TrajectoryBank& bank,
                        std::shared_ptr<const LanguageEncoder> encoder, const CheckpointHook& hook) {
  const ModelShape shape = shape_for(*encoder);
  TrainingState state = masked_irl::train(train, bank, config.train_config(), std::move(encoder), shape, hook);
  if (config.fine_tune_epochs > 0 && !fine_tune.empty()) {
    TrainingState tuned{state.model, make_adam_state(state.model.params()), 0, std::move(state.log)};
    run_epochs(tuned, fine_tune, bank, config.fine_tune_config(), "fine_tune", hook);
    return tuned;
  }
  return state;
}

Instruction eval_instruction(const RunConfig& config, const PreferenceWeights& w) {
  return render_instruction(
      w, config.eval_instruction == EvalInstruction::kClear ? InstructionMode::kClear : config.instruction_mode);
}

ScorerFactory model_scorers(const RunConfig& config, const RewardModel& model,
                            std::function<StateMask(const PreferenceWeights&)> mask_for) {
  const bool explicit_mask = config.mode == TrainMode::kExplicitMask;
  if (explicit_mask && !mask_for) mask_for = [](const PreferenceWeights& w) { return oracle_mask(w); };
  return [&model, config, explicit_mask, mask_for](const PreferenceWeights& w) {
    const std::string text = eval_instruction(config, w).text;
    if (explicit_mask) return learned_scorer(model, text, mask_for(w));
    return learned_scorer(model, text);
  };
}

std::vector<PreferenceMetrics> evaluate_method(const RunConfig& config, const std::string& method,
                                               const ScorerFactory& scorers,
                                               const std::vector<PreferenceWeights>& preferences,
                                               const TrajectoryBank& test_bank) {
  const std::vector<StateVector> states = bank_states(test_bank);
  const std::uint64_t base = stage_seed(config, "eval");
  std::vector<PreferenceMetrics> out;
  for (std::size_t p = 0; p < preferences.size(); ++p) {
    const PreferenceWeights& w = preferences[p];
    const Scorer scorer = scorers(w);
    Rng pair_rng(derive_seed(base, p, 1));
    Rng noise_rng(derive_seed(base, p, 2));
    const double wr = win_rate(scorer, w, test_bank, config.eval_pairs, pair_rng);
    const double var = reward_variance(scorer, oracle_mask(w), states, config.variance_draws, noise_rng);
    out.push_back(PreferenceMetrics{method, config.seed, w, wr, var, regret(scorer, w, test_bank)});
  }
  return out;
}

std::vector<PreferenceWeights> eval_preferences(const RunConfig& config) {
  auto [train, test] = select_preferences(config);
  return test.empty() ? train : test;
}

PreferenceWeights parse_preference(std::string_view text) {
  if (text.size() != static_cast<std::size_t>(kFeatureCount)) throw ParseError("bad preference string", std::string(text));
  std::array<int, kFeatureCount> w{};
  for (std::size_t i = 0; i < w.size(); ++i) {
    switch (text[i]) {
      case '+': w[i] = 1; break;
      case '-': w[i] = -1; break;
      case '0': w[i] = 0; break;
      default: throw ParseError("bad preference string", std::string(text));
    }
  }
  return PreferenceWeights(w);
}

RunFiles::RunFiles(const std::filesystem::path& d)
    : dir(d),
      train_bank(d / "bank_train.jsonl"),
      test_bank(d / "bank_test.jsonl"),
      train_data(d / "train.jsonl"),
      fine_tune_data(d / "fine_tune.jsonl"),
      train_annotated(d / "train_annotated.jsonl"),
      fine_tune_annotated(d / "fine_tune_annotated.jsonl"),
      annotation_cache(d / "annotation_cache.jsonl"),
      annotation_failures(d / "annotation_failures.jsonl"),
      annotation_summary(d / "annotation_summary.json"),
      checkpoint(d / "checkpoint.json"),
      training_log(d / "training_log.csv"),
      report_rows(d / "report_rows.csv"),
      report_per_preference(d / "report_per_preference.csv"),
      plot_win_rate(d / "plot_win_rate.csv"),
      plot_variance(d / "plot_variance.csv"),
      plot_regret(d / "plot_regret.csv") {}

std::filesystem::path RunFiles::resolved_config(std::string_view command) const {
  return dir / ("resolved_" + std::string(command) + ".conf");
}

namespace {

void write_resolved(const RunConfig& config, std::string_view command) {
  write_file(RunFiles(config.out).resolved_config(command), config.to_text());
}

std::string config_hash(const RunConfig& config) {
  std::string text;
  for (const char* key : {"seed", "mode", "lambda", "learning_rate", "batch_size",
                          "negatives", "mask_draws", "precision", "encoder", "embed_dim"}) {
    text += std::string(key) + "=" + config.get(key) + "\n";
  }
  return sha256_hex(text);
}

std::string plot_csv(const EvalReport& report, double StratumRow::*mean, double StratumRow::*se,
                     std::optional<int> demos) {
  std::ostringstream out;
  out << "method,stratum," << (demos ? "demos_per_preference," : "") << "mean,se\n";
  for (const auto& r : report.rows) {
    out << r.method << ',' << to_string(r.stratum) << ',';
    if (demos) out << *demos << ',';
    out << format_number(r.*mean) << ',' << format_number(r.*se) << '\n';
  }
  return out.str();
}

void write_report(const RunFiles& files, const EvalReport& report, int demos) {
  write_file(files.report_rows, report.rows_csv());
  write_file(files.report_per_preference, report.per_preference_csv());
  write_file(files.plot_win_rate, plot_csv(report, &StratumRow::win_rate_mean, &StratumRow::win_rate_se, demos));
  write_file(files.plot_variance,
             plot_csv(report, &StratumRow::variance_mean, &StratumRow::variance_se, std::nullopt));
  write_file(files.plot_regret, plot_csv(report, &StratumRow::regret_mean, &StratumRow::regret_se, std::nullopt));
}

std::vector<AnnotatedExample> load_training_data(const RunConfig& config, const std::filesystem::path& annotated,
                                                 const std::filesystem::path& raw) {
  if (std::filesystem::exists(annotated)) return load_dataset(annotated);
  if (config.provider == ProviderKind::kOracle || config.mode == TrainMode::kLcRl) return load_dataset(raw);
  throw ValidationError("no annotated dataset at " + annotated.string() + "; run annotate first");
}

}  // namespace

void cmd_gen_data(const RunConfig& config) {
  const RunFiles files(config.out);
  const GeneratedData data = generate_data(config);
  save_bank(files.train_bank, data.train_bank, config.seed);
  save_bank(files.test_bank, data.test_bank, config.seed);
  save_dataset(files.train_data, data.train, config.seed);
  save_dataset(files.fine_tune_data, data.fine_tune, config.seed);
  write_resolved(config, "gen-data");
}

std::size_t cmd_annotate(const RunConfig& config) {
  config.validate();
  const RunFiles files(config.out);
  const TrajectoryBank bank = load_bank(files.train_bank);
  AnnotationCache cache(files.annotation_cache);
  json summary = json::object();
  std::string manifest;
  std::size_t failed = 0;
  const std::array<std::pair<std::filesystem::path, std::filesystem::path>, 2> jobs{
      {{files.train_data, files.train_annotated}, {files.fine_tune_data, files.fine_tune_annotated}}};
  for (const auto& [in, out] : jobs) {
    std::uint64_t seed = 0;
    const auto examples = load_dataset(in, &seed);
    const AnnotationOutcome outcome = annotate_examples(config, examples, bank, &cache);
    save_dataset(out, outcome.examples, seed);
    for (const auto& f : outcome.failures) {
      manifest += json{{"dataset", in.filename().string()},
                       {"example", f.example},
                       {"family", f.family},
                       {"instruction", f.instruction},
                       {"error", f.error}}
                      .dump() +
                  "\n";
    }
    failed += outcome.failures.size();
    summary[in.filename().string()] = json{{"input_examples", examples.size()},
                                           {"output_examples", outcome.examples.size()},
                                           {"failures", outcome.failures.size()},
                                           {"round_accuracy", outcome.round_accuracy},
                                           {"selected_round", outcome.selected_round}};
  }
  write_file(files.annotation_failures, manifest);
  write_file(files.annotation_summary, summary.dump(2) + "\n");
  write_resolved(config, "annotate");
  return failed;
}

TrainingState cmd_train(const RunConfig& config, bool resume) {
  config.validate();
  const RunFiles files(config.out);
  const TrajectoryBank bank = load_bank(files.train_bank);
  const auto train = load_training_data(config, files.train_annotated, files.train_data);
  std::vector<AnnotatedExample> fine_tune;
  if (config.fine_tune_epochs > 0) fine_tune = load_training_data(config, files.fine_tune_annotated, files.fine_tune_data);
  const auto encoder = config.make_encoder();
  const std::string hash = config_hash(config);
  const CheckpointHook hook = [&](const TrainingState& s) {
    const std::string phase = s.log.epochs.empty() ? "pretrain" : s.log.epochs.back().phase;
    save_checkpoint(files.checkpoint, s, CheckpointMeta{phase, config.seed, hash});
  };
  write_resolved(config, "train");

  TrainingState state = [&] {
    if (!resume) return train_run(config, train, fine_tune, bank, encoder, hook);
    Checkpoint ck = load_checkpoint(files.checkpoint, encoder);
    if (ck.meta.config_hash != hash) throw ValidationError("checkpoint was written with different training settings");
    TrainingState s = std::move(ck.state);
    if (ck.meta.phase == "pretrain") {
      TrainConfig rest = config.train_config();
      rest.epochs = std::max(0, config.epochs - s.epochs_completed);
      run_epochs(s, train, bank, rest, "pretrain", hook);
      if (config.fine_tune_epochs > 0 && !fine_tune.empty()) {
        TrainingState tuned{s.model, make_adam_state(s.model.params()), 0, std::move(s.log)};
        run_epochs(tuned, fine_tune, bank, config.fine_tune_config(), "fine_tune", hook);
        return tuned;
      }
      return s;
    }
    TrainConfig rest = config.fine_tune_config();
    rest.epochs = std::max(0, config.fine_tune_epochs - s.epochs_completed);
    run_epochs(s, fine_tune, bank, rest, "fine_tune", hook);
    return s;
  }();
  const bool tuned = config.fine_tune_epochs > 0 && !fine_tune.empty();
  save_checkpoint(files.checkpoint, state, CheckpointMeta{tuned ? "fine_tune" : "pretrain", config.seed, hash});
  write_file(files.training_log, state.log.to_csv());
  return state;
}

EvalReport cmd_eval(const RunConfig& config, const std::optional<std::string>& stub,
                    const std::optional<std::filesystem::path>& checkpoint) {
  config.validate();
  const RunFiles files(config.out);
  const TrajectoryBank test_bank = load_bank(files.test_bank);
  const auto preferences = eval_preferences(config);

  std::vector<PreferenceMetrics> metrics;
  if (stub) {
    ScorerFactory scorers;
    if (*stub == "gt") {
      scorers = [](const PreferenceWeights& w) { return gt_scorer(w); };
    } else if (*stub == "neg_gt") {
      scorers = [](const PreferenceWeights& w) { return negated_scorer(gt_scorer(w)); };
    } else if (*stub == "random") {
      const std::uint64_t seed = stage_seed(config, "random_scorer");
      scorers = [seed](const PreferenceWeights&) { return random_scorer(seed); };
    } else {
      throw ValidationError("unknown stub: " + *stub + " (expected gt, neg_gt or random)");
    }
    metrics = evaluate_method(config, *stub, scorers, preferences, test_bank);
  } else {
    const auto encoder = config.make_encoder();
    const Checkpoint ck = load_checkpoint(checkpoint.value_or(files.checkpoint), encoder);
    std::unique_ptr<ChatProvider> provider;
    std::unique_ptr<AnnotationCache> cache;
    std::function<StateMask(const PreferenceWeights&)> mask_for;
    if (config.mode == TrainMode::kExplicitMask && config.provider != ProviderKind::kOracle) {
      provider = make_provider(config, 0);
      cache = std::make_unique<AnnotationCache>(files.annotation_cache);
      mask_for = [&](const PreferenceWeights& w) {
        return predict_mask(eval_instruction(config, w).text, LlmClient{provider.get(), cache.get()});
      };
    }
    metrics = evaluate_method(config, config.method_label(), model_scorers(config, ck.state.model, mask_for),
                              preferences, test_bank);
  }
  const EvalReport report = build_report(std::move(metrics));
  write_report(files, report, config.demos_per_preference);
  write_resolved(config, "eval");
  return report;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

}  // namespace

void cmd_report(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& out) {
  if (run_dirs.empty()) throw ValidationError("report needs at least one run directory");
  std::map<int, std::vector<PreferenceMetrics>> by_demos;
  for (const auto& dir : run_dirs) {
    const RunFiles files(dir);
    const RunConfig config = load_run_config(files.resolved_config("eval"));
    std::istringstream in(read_file(files.report_per_preference));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      if (cells.size() != 7) throw ParseError("bad per-preference row", line);
      by_demos[config.demos_per_preference].push_back(PreferenceMetrics{cells[0], std::stoull(cells[1]),
                                                                        parse_preference(cells[2]),
                                                                        parse_double(cells[4]), parse_double(cells[5]),
                                                                        parse_double(cells[6])});
    }
  }

  std::string rows = "demos_per_preference,";
  std::string win = "method,stratum,demos_per_preference,mean,se\n";
  std::string per_preference, variance, regret_csv;
  bool first = true;
  for (auto& [demos, metrics] : by_demos) {
    const EvalReport report = build_report(std::move(metrics));
    std::istringstream csv(report.rows_csv());
    std::string line;
    std::getline(csv, line);
    if (first) rows += line + "\n";
    while (std::getline(csv, line)) rows += std::to_string(demos) + "," + line + "\n";
    for (const auto& r : report.rows) {
      win += r.method + "," + std::string(to_string(r.stratum)) + "," + std::to_string(demos) + "," +
             format_number(r.win_rate_mean) + "," + format_number(r.win_rate_se) + "\n";
    }
    const std::string pp = report.per_preference_csv();
    per_preference += first ? pp : pp.substr(pp.find('\n') + 1);
    // Variance and regret bars come from the largest demo count.
    variance = plot_csv(report, &StratumRow::variance_mean, &StratumRow::variance_se, std::nullopt);
    regret_csv = plot_csv(report, &StratumRow::regret_mean, &StratumRow::regret_se, std::nullopt);
    first = false;
  }
  const RunFiles files(out);
  write_file(files.report_rows, rows);
  write_file(files.report_per_preference, per_preference);
  write_file(files.plot_win_rate, win);
  write_file(files.plot_variance, variance);
  write_file(files.plot_regret, regret_csv);
}

}  // namespace masked_irl
