#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "masked_irl/evaluation.hpp"
#include "masked_irl/io.hpp"
#include "masked_irl/llm.hpp"
#include "masked_irl/run_config.hpp"
#include "masked_irl/training.hpp"

namespace masked_irl {

// In-memory stages. The cmd_* functions below wrap them with file I/O.

struct GeneratedData {
  TrajectoryBank train_bank;
  TrajectoryBank test_bank;  // held-out configs
  std::vector<PreferenceWeights> train_preferences;
  std::vector<PreferenceWeights> test_preferences;
  std::vector<AnnotatedExample> train;      // train preferences on the train bank
  std::vector<AnnotatedExample> fine_tune;  // test preferences on the train bank
};

/// Draws the train and test preferences from the configured pool (disjoint,
/// each kept in pool order).
std::pair<std::vector<PreferenceWeights>, std::vector<PreferenceWeights>> select_preferences(const RunConfig& config);

GeneratedData generate_data(const RunConfig& config);

/// Provider for annotation round `round`. Mock rounds use sub-seeds of the
/// run's mock seed. Returns null for the oracle provider.
std::unique_ptr<ChatProvider> make_provider(const RunConfig& config, int round = 0);

struct AnnotationOutcome {
  std::vector<AnnotatedExample> examples;
  std::vector<AnnotationFailure> failures;
  int selected_round = 0;
  std::vector<double> round_accuracy;  // empty when nothing needed disambiguation
};

/// Predicts masks for clear instructions. Ambiguous ones are disambiguated
/// when config.disambiguate is set, over config.annotation_rounds rounds,
/// keeping the round with the best instruction accuracy; otherwise their
/// masks come from the ambiguous text. The oracle provider returns the
/// input unchanged.
AnnotationOutcome annotate_examples(const RunConfig& config, const std::vector<AnnotatedExample>& examples,
                                    const TrajectoryBank& bank, AnnotationCache* cache);

/// Pretraining on `train`, then config.fine_tune_epochs on `fine_tune` when
/// both are non-empty. The returned log holds both phases.
TrainingState train_run(const RunConfig& config, const std::vector<AnnotatedExample>& train,
                        const std::vector<AnnotatedExample>& fine_tune, const TrajectoryBank& bank,
                        std::shared_ptr<const LanguageEncoder> encoder, const CheckpointHook& hook = {});

/// Instruction a preference is evaluated with.
Instruction eval_instruction(const RunConfig& config, const PreferenceWeights& w);

using ScorerFactory = std::function<Scorer(const PreferenceWeights&)>;

/// Learned reward conditioned on the evaluation instruction. explicit_mask
/// runs also mask the input, with `mask_for` giving the mask.
ScorerFactory model_scorers(const RunConfig& config, const RewardModel& model,
                            std::function<StateMask(const PreferenceWeights&)> mask_for = {});

/// Win rate, reward variance on the test bank's states and regret for every
/// preference. Randomness depends on the master seed and the preference
/// index only, so methods are compared on identical samples.
std::vector<PreferenceMetrics> evaluate_method(const RunConfig& config, const std::string& method,
                                               const ScorerFactory& scorers,
                                               const std::vector<PreferenceWeights>& preferences,
                                               const TrajectoryBank& test_bank);

/// Preferences evaluated by cmd_eval: the test ones when there are any,
/// otherwise the train ones (on held-out configs either way).
std::vector<PreferenceWeights> eval_preferences(const RunConfig& config);

/// Parses PreferenceWeights::to_string output such as "+0-00".
PreferenceWeights parse_preference(std::string_view text);

// File-based commands. All paths live under config.out.

struct RunFiles {
  explicit RunFiles(const std::filesystem::path& dir);
  std::filesystem::path dir;
  std::filesystem::path train_bank, test_bank;
  std::filesystem::path train_data, fine_tune_data;
  std::filesystem::path train_annotated, fine_tune_annotated;
  std::filesystem::path annotation_cache, annotation_failures, annotation_summary;
  std::filesystem::path checkpoint, training_log;
  std::filesystem::path report_rows, report_per_preference;
  std::filesystem::path plot_win_rate, plot_variance, plot_regret;
  std::filesystem::path resolved_config(std::string_view command) const;
};

void cmd_gen_data(const RunConfig& config);
/// Returns the number of failed annotations (also written to the manifest).
std::size_t cmd_annotate(const RunConfig& config);
/// With `resume`, continues from the checkpoint in the run directory.
TrainingState cmd_train(const RunConfig& config, bool resume = false);

/// Evaluates the run's checkpoint, or a reference scorer when `stub` is one
/// of "gt", "neg_gt", "random".
EvalReport cmd_eval(const RunConfig& config, const std::optional<std::string>& stub = std::nullopt,
                    const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

/// Merges the per-preference results of several eval directories into one
/// report plus plot-data series, grouped by demos per preference.
void cmd_report(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& out);

}  // namespace masked_irl
