#include <chrono>
#include <filesystem>
#include <set>
#include <sstream>

#include "doctest.h"
#include "masked_irl/errors.hpp"
#include "masked_irl/io.hpp"
#include "masked_irl/pipeline.hpp"
#include "masked_irl/run_config.hpp"
#include "support/test_support.hpp"

using namespace masked_irl;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("masked_irl_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

RunConfig quick_config(const fs::path& out, std::uint64_t seed = 7) {
  RunConfig c;
  c.seed = seed;
  c.out = out;
  c.epochs = 3;
  c.embed_dim = 32;
  c.eval_pairs = 200;
  return c;
}

std::string read(const fs::path& p) { return read_file(p); }

}  // namespace

TEST_CASE("run config text round trips") {
  RunConfig c;
  c.seed = 42;
  c.instruction_mode = InstructionMode::kExpressionOmitted;
  c.provider = ProviderKind::kMock;
  c.mock_p_flip = 0.15;
  c.disambiguate = false;
  c.mode = TrainMode::kExplicitMask;
  c.learning_rate = 3e-4;
  c.label = "explicit";
  c.out = "runs/x";
  const RunConfig back = parse_run_config(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.mock_p_flip == 0.15);
  CHECK(back.learning_rate == 3e-4);
  const std::string text = c.to_text();
  CHECK(RunConfig::keys().size() == static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));

  const RunConfig parsed = parse_run_config("# comment\n  seed = 5   # trailing\n\nmode=lc_rl\n");
  CHECK(parsed.seed == 5);
  CHECK(parsed.mode == TrainMode::kLcRl);
  CHECK(parsed.method_label() == "lc_rl");
}

TEST_CASE("run config rejects bad input") {
  CHECK_THROWS_AS(parse_run_config("sed = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_run_config("seed 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_run_config("epochs = 3.5\n"), ValidationError);
  CHECK_THROWS_AS(parse_run_config("mode = irl\n"), ValidationError);
  CHECK_THROWS_AS(parse_run_config("disambiguate = maybe\n"), ValidationError);

  RunConfig c;
  c.demos_per_preference = c.train_configs * c.pairs + 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = RunConfig{};
  c.train_preferences = 5;
  c.test_preferences = 2;  // the sparse distance pool has 6
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.preference_pool = PreferencePool::kAll;
  CHECK_NOTHROW(c.validate());
  c.encoder = "cache";
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = RunConfig{};
  c.variance_draws = 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("bank and dataset files round trip byte for byte") {
  RunConfig c;
  c.seed = 3;
  c.instruction_mode = InstructionMode::kReferentOmitted;
  const GeneratedData data = generate_data(c);

  std::ostringstream bank1;
  write_bank(bank1, data.train_bank, 3);
  std::istringstream bank_in(bank1.str());
  const TrajectoryBank bank = read_bank(bank_in);
  std::ostringstream bank2;
  write_bank(bank2, bank, 3);
  CHECK(bank1.str() == bank2.str());
  CHECK(bank.trajectory_count() == data.train_bank.trajectory_count());
  CHECK(bank.groups.front().trajectories.front() == data.train_bank.groups.front().trajectories.front());

  std::vector<AnnotatedExample> examples = data.train;
  examples[0].original = examples[0].instruction;
  examples[0].instruction = render_instruction(examples[0].preference, InstructionMode::kClear);
  examples[0].instruction.ambiguity = Ambiguity::kDisambiguated;
  examples[1].annotation_failed = true;
  examples[1].mask = StateMask::all_ones(MaskProvenance::kMock);
  std::ostringstream ds1;
  write_dataset(ds1, examples, 3);
  std::istringstream ds_in(ds1.str());
  std::uint64_t seed = 0;
  const auto back = read_dataset(ds_in, &seed);
  CHECK(seed == 3);
  std::ostringstream ds2;
  write_dataset(ds2, back, 3);
  CHECK(ds1.str() == ds2.str());
  REQUIRE(back.size() == examples.size());
  CHECK(back[0].original.has_value());
  CHECK(back[0].instruction.ambiguity == Ambiguity::kDisambiguated);
  CHECK(back[1].annotation_failed);
  CHECK(back[1].mask == examples[1].mask);
  CHECK(back[5].trajectory == examples[5].trajectory);

  std::istringstream wrong(bank1.str());
  CHECK_THROWS(read_dataset(wrong));
}

TEST_CASE("generated data sizes") {
  RunConfig c;
  c.train_configs = 20;
  c.pairs = 10;
  c.perturbed = 5;
  c.preference_pool = PreferencePool::kAll;
  c.train_preferences = 40;
  c.test_preferences = 10;
  c.demos_per_preference = 10;
  const GeneratedData data = generate_data(c);
  CHECK(data.train.size() == 400);
  CHECK(data.fine_tune.size() == 100);
  CHECK(data.train_bank.trajectory_count() == 20u * 10u * 6u);
  std::set<PreferenceWeights> train(data.train_preferences.begin(), data.train_preferences.end());
  for (const auto& w : data.test_preferences) CHECK(train.count(w) == 0);
  for (const auto& ex : data.train) CHECK(ex.mask == oracle_mask(ex.preference));
}

TEST_CASE("gen-data is deterministic and fast") {
  TempDir a("gen_a"), b("gen_b");
  const auto start = std::chrono::steady_clock::now();
  cmd_gen_data(quick_config(a.path()));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 60.0);
  cmd_gen_data(quick_config(b.path()));
  for (const char* name : {"bank_train.jsonl", "bank_test.jsonl", "train.jsonl", "fine_tune.jsonl"}) {
    INFO(name);
    CHECK(read(a.path() / name) == read(b.path() / name));
  }
  TempDir c("gen_c");
  cmd_gen_data(quick_config(c.path(), 8));
  CHECK(read(a.path() / "train.jsonl") != read(c.path() / "train.jsonl"));
}

TEST_CASE("noiseless mock annotation reproduces oracle masks") {
  TempDir dir("annotate_clear");
  RunConfig c = quick_config(dir.path());
  c.provider = ProviderKind::kMock;
  cmd_gen_data(c);
  CHECK(cmd_annotate(c) == 0);
  const auto annotated = load_dataset(RunFiles(dir.path()).train_annotated);
  REQUIRE(annotated.size() == 60);
  std::vector<StateMask> predicted, oracle;
  for (const auto& ex : annotated) {
    CHECK(ex.mask.provenance == MaskProvenance::kMock);
    predicted.push_back(ex.mask);
    oracle.push_back(oracle_mask(ex.preference));
  }
  CHECK(mask_metrics(predicted, oracle).f1 == 1.0);
}

TEST_CASE("replay reproduces a mock annotation from the cache") {
  TempDir dir("annotate_replay");
  RunConfig c = quick_config(dir.path());
  c.provider = ProviderKind::kMock;
  c.mock_p_flip = 0.1;
  c.instruction_mode = InstructionMode::kReferentOmitted;
  cmd_gen_data(c);
  cmd_annotate(c);
  const RunFiles files(dir.path());
  const std::string first = read(files.train_annotated);

  RunConfig replay = c;
  replay.provider = ProviderKind::kReplay;
  replay.llm_model = MockAnnotator({c.mock_p_flip, 0.0, stage_seed(c, "mock")}).model();
  cmd_annotate(replay);
  CHECK(read(files.train_annotated) == first);

  replay.llm_model = "some-other-model";
  CHECK(cmd_annotate(replay) > 0);
}

TEST_CASE("ambiguous examples are replaced by disambiguated ones") {
  TempDir dir("annotate_ambiguous");
  RunConfig c = quick_config(dir.path());
  c.provider = ProviderKind::kMock;
  c.instruction_mode = InstructionMode::kExpressionOmitted;
  cmd_gen_data(c);
  const std::size_t failures = cmd_annotate(c);
  const auto annotated = load_dataset(RunFiles(dir.path()).train_annotated);
  std::size_t flagged = 0, disambiguated = 0;
  for (const auto& ex : annotated) {
    if (ex.annotation_failed) {
      ++flagged;
      CHECK(ex.instruction.is_ambiguous());
      continue;
    }
    CHECK(ex.instruction.ambiguity == Ambiguity::kDisambiguated);
    REQUIRE(ex.original.has_value());
    CHECK(ex.original->ambiguity == Ambiguity::kExpressionOmitted);
    CHECK(ex.mask.bits == MockAnnotator::instruction_mask(ex.instruction.text).bits);
    ++disambiguated;
  }
  CHECK(flagged == failures);
  CHECK(disambiguated > 0);
  CHECK(annotated.size() >= 60 - flagged);

  const std::string summary = read(RunFiles(dir.path()).annotation_summary);
  CHECK(summary.find("round_accuracy") != std::string::npos);

  // Without disambiguation the ambiguous text is annotated as is.
  RunConfig plain = c;
  plain.disambiguate = false;
  cmd_annotate(plain);
  const auto raw = load_dataset(RunFiles(dir.path()).train_annotated);
  REQUIRE(raw.size() == 60);
  for (const auto& ex : raw) {
    CHECK(ex.instruction.ambiguity == Ambiguity::kExpressionOmitted);
    CHECK(ex.mask.bits == MockAnnotator::instruction_mask(ex.instruction.text).bits);
  }
}

TEST_CASE("lc_rl training is unaffected by corrupted masks") {
  TempDir dir("lc_rl");
  RunConfig c = quick_config(dir.path());
  c.mode = TrainMode::kLcRl;
  const GeneratedData data = generate_data(c);
  std::vector<AnnotatedExample> corrupted = data.train;
  Rng rng(1);
  for (auto& ex : corrupted) ex.mask = masked_irl::testing::random_mask(rng);
  const auto encoder = c.make_encoder();
  const TrainingState a = train_run(c, data.train, {}, data.train_bank, encoder);
  const TrainingState b = train_run(c, corrupted, {}, data.train_bank, encoder);
  REQUIRE(a.log.epochs.size() == 3);
  for (std::size_t e = 0; e < a.log.epochs.size(); ++e) {
    CHECK(a.log.epochs[e].total_loss == b.log.epochs[e].total_loss);
    CHECK(a.log.epochs[e].mask_loss == 0.0);
  }
  CHECK(a.model.params().mlp[0].weight == b.model.params().mlp[0].weight);
}

TEST_CASE("resume continues epoch numbering and matches an uninterrupted run") {
  TempDir split("resume_split"), whole("resume_whole");
  RunConfig c = quick_config(split.path());
  c.epochs = 2;
  c.checkpoint_every = 1;
  cmd_gen_data(c);
  cmd_train(c);
  c.epochs = 4;
  const TrainingState resumed = cmd_train(c, true);

  RunConfig w = quick_config(whole.path());
  w.epochs = 4;
  cmd_gen_data(w);
  const TrainingState straight = cmd_train(w);

  REQUIRE(resumed.log.epochs.size() == 4);
  for (int e = 0; e < 4; ++e) {
    CHECK(resumed.log.epochs[static_cast<std::size_t>(e)].epoch == e);
    CHECK(resumed.log.epochs[static_cast<std::size_t>(e)].total_loss ==
          straight.log.epochs[static_cast<std::size_t>(e)].total_loss);
  }
  CHECK(resumed.model.params().mlp[3].weight == straight.model.params().mlp[3].weight);

  RunConfig changed = c;
  changed.lambda = 1.0;
  CHECK_THROWS_AS(cmd_train(changed, true), ValidationError);
}

TEST_CASE("fine-tuning continues the log under its own phase") {
  TempDir dir("fine_tune");
  RunConfig c = quick_config(dir.path());
  c.epochs = 2;
  c.train_preferences = 4;
  c.test_preferences = 2;
  c.fine_tune_epochs = 2;
  cmd_gen_data(c);
  const TrainingState s = cmd_train(c);
  REQUIRE(s.log.epochs.size() == 4);
  CHECK(s.log.epochs[1].phase == "pretrain");
  CHECK(s.log.epochs[2].phase == "fine_tune");
  CHECK(s.log.epochs[2].epoch == 0);
  const std::string csv = read(RunFiles(dir.path()).training_log);
  CHECK(csv.rfind("epoch,phase,irl_loss,mask_loss,total_loss,wall_time\n", 0) == 0);
  // Evaluation switches to the held-out preferences.
  CHECK(eval_preferences(c).size() == 2);
}

TEST_CASE("eval stubs give the reference metrics") {
  TempDir dir("eval_stub");
  RunConfig c = quick_config(dir.path());
  cmd_gen_data(c);
  const EvalReport gt = cmd_eval(c, std::string("gt"));
  for (const auto& m : gt.per_preference) {
    CHECK(m.win_rate == 1.0);
    CHECK(m.reward_variance == 0.0);
    CHECK(m.regret == 0.0);
  }
  const EvalReport neg = cmd_eval(c, std::string("neg_gt"));
  for (const auto& m : neg.per_preference) CHECK(m.win_rate == 0.0);
  const EvalReport random = cmd_eval(c, std::string("random"));
  CHECK(random.rows.front().win_rate_mean > 0.3);
  CHECK(random.rows.front().win_rate_mean < 0.7);
  CHECK_THROWS_AS(cmd_eval(c, std::string("oracle")), ValidationError);
}

TEST_CASE("explicit mask pipeline runs end to end and eval leaves the checkpoint alone") {
  TempDir dir("explicit");
  RunConfig c = quick_config(dir.path());
  c.mode = TrainMode::kExplicitMask;
  c.provider = ProviderKind::kMock;
  cmd_gen_data(c);
  cmd_annotate(c);
  cmd_train(c);
  const RunFiles files(dir.path());
  const std::string before = read(files.checkpoint);
  const EvalReport report = cmd_eval(c);
  CHECK(read(files.checkpoint) == before);
  REQUIRE(report.per_preference.size() == 6);
  for (const auto& m : report.per_preference) {
    CHECK(m.method == "explicit_mask");
    CHECK(m.win_rate >= 0.0);
    CHECK(m.win_rate <= 1.0);
    CHECK(std::isfinite(m.reward_variance));
  }
  for (const auto& p : {files.report_rows, files.report_per_preference, files.plot_win_rate, files.plot_variance,
                        files.plot_regret, files.resolved_config("eval")}) {
    CHECK(fs::exists(p));
  }
  const Checkpoint ck = load_checkpoint(files.checkpoint, c.make_encoder());
  CHECK(ck.state.epochs_completed == 3);
  RunConfig other = c;
  other.embed_dim = 16;
  CHECK_THROWS_AS(load_checkpoint(files.checkpoint, other.make_encoder()), ValidationError);
}

TEST_CASE("report merges runs by demonstration count and covers every stratum") {
  TempDir a("report_a"), b("report_b"), out("report_out");
  for (const auto& [dir, demos] : {std::pair{a.path(), 3}, std::pair{b.path(), 6}}) {
    RunConfig c = quick_config(dir);
    c.preference_pool = PreferencePool::kAll;
    c.train_preferences = 30;
    c.demos_per_preference = demos;
    cmd_gen_data(c);
    cmd_eval(c, std::string("gt"));
  }
  cmd_report({a.path(), b.path()}, out.path());
  const std::string rows = read(RunFiles(out.path()).report_rows);
  CHECK(rows.rfind("demos_per_preference,method,stratum,", 0) == 0);
  for (const char* line : {"3,gt,sparse,", "3,gt,medium,", "3,gt,dense,", "6,gt,sparse,", "6,gt,dense,"}) {
    INFO(line);
    CHECK(rows.find(line) != std::string::npos);
  }
  const std::string win = read(RunFiles(out.path()).plot_win_rate);
  CHECK(win.find("gt,medium,6,1,0\n") != std::string::npos);
  CHECK_THROWS_AS(cmd_report({}, out.path()), ValidationError);
}
