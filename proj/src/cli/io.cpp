#include <fstream>
#include <sstream>

#include "masked_irl/errors.hpp"
#include "masked_irl/io.hpp"
#include "masked_irl/llm.hpp"

namespace masked_irl {

using nlohmann::json;

namespace {

json vec3(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3(const json& j) { return Vec3{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json config_json(const EnvironmentConfig& c) {
  return json{{"human", vec3(c.human)},
              {"laptop", vec3(c.laptop)},
              {"table_z", c.table_z},
              {"workspace", json::array({vec3(c.workspace.min), vec3(c.workspace.max)})}};
}

EnvironmentConfig config_from(const json& j) {
  EnvironmentConfig c;
  c.human = vec3(j.at("human"));
  c.laptop = vec3(j.at("laptop"));
  c.table_z = j.at("table_z").get<double>();
  c.workspace = Box{vec3(j.at("workspace").at(0)), vec3(j.at("workspace").at(1))};
  return c;
}

json states_json(const Trajectory& t) {
  json out = json::array();
  for (const auto& s : t.states()) {
    for (double v : s.values()) out.push_back(v);
  }
  return out;
}

Trajectory trajectory_from(const json& states, const EnvironmentConfig& config) {
  if (states.size() != static_cast<std::size_t>(kTrajectoryLength * kStateDim)) {
    throw ValidationError("trajectory record needs " + std::to_string(kTrajectoryLength * kStateDim) + " values");
  }
  Trajectory::States out;
  std::size_t k = 0;
  for (auto& s : out) {
    std::array<double, kStateDim> v{};
    for (auto& x : v) x = states[k++].get<double>();
    s = StateVector(v);
  }
  return Trajectory(out, config);
}

json instruction_json(const Instruction& ins) {
  json canonical = nullptr;
  if (ins.canonical) {
    canonical = json::array();
    for (const auto& [f, s] : *ins.canonical) canonical.push_back(json::array({f, s}));
  }
  return json{{"text", ins.text}, {"ambiguity", std::string(to_string(ins.ambiguity))}, {"canonical", canonical}};
}

Instruction instruction_from(const json& j) {
  Instruction ins;
  ins.text = j.at("text").get<std::string>();
  ins.ambiguity = ambiguity_from_string(j.at("ambiguity").get<std::string>());
  if (!j.at("canonical").is_null()) {
    CanonicalForm c;
    for (const auto& p : j.at("canonical")) c.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    ins.canonical = std::move(c);
  }
  return ins;
}

std::string mask_bits(const StateMask& m) {
  std::string bits;
  for (auto b : m.bits) bits.push_back(b ? '1' : '0');
  return bits;
}

StateMask mask_from(const json& j) {
  StateMask m;
  const auto bits = j.at("bits").get<std::string>();
  if (bits.size() != static_cast<std::size_t>(kStateDim)) throw ValidationError("mask needs 19 bits");
  for (int i = 0; i < kStateDim; ++i) {
    const char c = bits[static_cast<std::size_t>(i)];
    if (c != '0' && c != '1') throw ValidationError("mask bits must be 0 or 1");
    m.bits[static_cast<std::size_t>(i)] = c == '1';
  }
  m.provenance = mask_provenance_from_string(j.at("provenance").get<std::string>());
  return m;
}

json header(std::string_view kind, std::uint64_t seed, std::size_t count) {
  return json{{"record", "header"},
              {"kind", kind},
              {"layout_version", kLayoutVersion},
              {"seed", seed},
              {"state_dim", kStateDim},
              {"trajectory_length", kTrajectoryLength},
              {"records", count}};
}

json read_header(std::istream& in, std::string_view kind) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("missing header record");
  const json h = json::parse(line);
  if (h.value("record", "") != "header" || h.value("kind", "") != kind) {
    throw ValidationError("expected a " + std::string(kind) + " header record");
  }
  if (h.at("layout_version").get<int>() != kLayoutVersion) throw ValidationError("unsupported layout version");
  if (h.at("state_dim").get<int>() != kStateDim || h.at("trajectory_length").get<int>() != kTrajectoryLength) {
    throw ValidationError("state layout mismatch");
  }
  return h;
}

std::vector<json> read_records(std::istream& in, std::size_t expected) {
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(json::parse(line));
  }
  if (out.size() != expected) {
    throw ValidationError("expected " + std::to_string(expected) + " records, found " + std::to_string(out.size()));
  }
  return out;
}

}  // namespace

void write_bank(std::ostream& out, const TrajectoryBank& bank, std::uint64_t seed) {
  std::size_t records = bank.configs.size();
  for (const auto& g : bank.groups) records += g.trajectories.size();
  json h = header("bank", seed, records);
  h["split"] = bank.split == Split::kTrain ? "train" : "test";
  out << h.dump() << '\n';
  for (std::size_t i = 0; i < bank.configs.size(); ++i) {
    json r{{"record", "config"}, {"id", i}};
    r.update(config_json(bank.configs[i]));
    out << r.dump() << '\n';
  }
  for (const auto& g : bank.groups) {
    for (std::size_t k = 0; k < g.trajectories.size(); ++k) {
      const json r{{"record", "trajectory"},
                   {"config_id", g.config_id},
                   {"pair_id", g.pair_id},
                   {"index", k},
                   {"states", states_json(g.trajectories[k])}};
      out << r.dump() << '\n';
    }
  }
}

TrajectoryBank read_bank(std::istream& in) {
  const json h = read_header(in, "bank");
  TrajectoryBank bank;
  bank.split = h.at("split").get<std::string>() == "test" ? Split::kTest : Split::kTrain;
  for (const auto& r : read_records(in, h.at("records").get<std::size_t>())) {
    const auto type = r.at("record").get<std::string>();
    if (type == "config") {
      if (r.at("id").get<std::size_t>() != bank.configs.size()) throw ValidationError("config records out of order");
      bank.configs.push_back(config_from(r));
    } else if (type == "trajectory") {
      const int config_id = r.at("config_id").get<int>(), pair_id = r.at("pair_id").get<int>();
      if (config_id < 0 || static_cast<std::size_t>(config_id) >= bank.configs.size()) {
        throw ValidationError("trajectory references an unknown config");
      }
      if (bank.groups.empty() || bank.groups.back().config_id != config_id || bank.groups.back().pair_id != pair_id) {
        bank.groups.push_back(TrajectoryGroup{config_id, pair_id, {}});
      }
      auto& group = bank.groups.back();
      if (r.at("index").get<std::size_t>() != group.trajectories.size()) {
        throw ValidationError("trajectory records out of order");
      }
      group.trajectories.push_back(trajectory_from(r.at("states"), bank.configs[static_cast<std::size_t>(config_id)]));
    } else {
      throw ValidationError("unknown bank record: " + type);
    }
  }
  return bank;
}

void write_dataset(std::ostream& out, const std::vector<AnnotatedExample>& examples, std::uint64_t seed) {
  out << header("dataset", seed, examples.size()).dump() << '\n';
  for (const auto& ex : examples) {
    const json r{{"record", "example"},
                 {"demo_id", ex.demo_id},
                 {"config_id", ex.config_id},
                 {"pair_id", ex.pair_id},
                 {"config", config_json(ex.trajectory.config())},
                 {"states", states_json(ex.trajectory)},
                 {"instruction", instruction_json(ex.instruction)},
                 {"mask", {{"bits", mask_bits(ex.mask)}, {"provenance", std::string(to_string(ex.mask.provenance))}}},
                 {"preference", ex.preference.values()},
                 {"original", ex.original ? instruction_json(*ex.original) : json(nullptr)},
                 {"annotation_failed", ex.annotation_failed}};
    out << r.dump() << '\n';
  }
}

std::vector<AnnotatedExample> read_dataset(std::istream& in, std::uint64_t* seed) {
  const json h = read_header(in, "dataset");
  if (seed) *seed = h.at("seed").get<std::uint64_t>();
  std::vector<AnnotatedExample> out;
  for (const auto& r : read_records(in, h.at("records").get<std::size_t>())) {
    if (r.at("record") != "example") throw ValidationError("unknown dataset record");
    const EnvironmentConfig config = config_from(r.at("config"));
    AnnotatedExample ex{r.at("demo_id").get<int>(),
                        r.at("config_id").get<int>(),
                        r.at("pair_id").get<int>(),
                        trajectory_from(r.at("states"), config),
                        instruction_from(r.at("instruction")),
                        mask_from(r.at("mask")),
                        PreferenceWeights(r.at("preference").get<std::array<int, kFeatureCount>>()),
                        std::nullopt,
                        r.at("annotation_failed").get<bool>()};
    if (!r.at("original").is_null()) ex.original = instruction_from(r.at("original"));
    out.push_back(std::move(ex));
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << content;
  if (!out) throw ValidationError("write failed: " + path.string());
}

void save_bank(const std::filesystem::path& path, const TrajectoryBank& bank, std::uint64_t seed) {
  std::ostringstream out;
  write_bank(out, bank, seed);
  write_file(path, out.str());
}

TrajectoryBank load_bank(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  return read_bank(in);
}

void save_dataset(const std::filesystem::path& path, const std::vector<AnnotatedExample>& examples,
                  std::uint64_t seed) {
  std::ostringstream out;
  write_dataset(out, examples, seed);
  write_file(path, out.str());
}

std::vector<AnnotatedExample> load_dataset(const std::filesystem::path& path, std::uint64_t* seed) {
  std::istringstream in(read_file(path));
  return read_dataset(in, seed);
}

namespace {

json tensors_json(const RewardModelParams& params) {
  json out = json::object();
  for (const auto& [name, t] : params.tensors()) {
    json data = json::array();
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) data.push_back((*t)(r, c));
    }
    out[name] = json{{"rows", t->rows()}, {"cols", t->cols()}, {"data", std::move(data)}};
  }
  return out;
}

void tensors_from(const json& j, RewardModelParams& params) {
  for (auto& [name, t] : params.tensors()) {
    const json& entry = j.at(name);
    if (entry.at("rows").get<Eigen::Index>() != t->rows() || entry.at("cols").get<Eigen::Index>() != t->cols()) {
      throw ValidationError("checkpoint tensor " + name + " has the wrong shape");
    }
    const json& data = entry.at("data");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) (*t)(r, c) = data.at(k++).get<double>();
    }
  }
}

json shape_json(const ModelShape& s) {
  return json{{"embed_dim", s.embed_dim}, {"film_hidden", s.film_hidden}, {"hidden", s.hidden}};
}

}  // namespace

json checkpoint_json(const TrainingState& state, const CheckpointMeta& meta) {
  json log = json::array();
  for (const auto& e : state.log.epochs) {
    log.push_back(json{{"epoch", e.epoch},
                       {"phase", e.phase},
                       {"irl_loss", e.irl_loss},
                       {"mask_loss", e.mask_loss},
                       {"total_loss", e.total_loss},
                       {"wall_time", e.wall_time}});
  }
  return json{{"format", "masked_irl.checkpoint"},
              {"layout_version", kLayoutVersion},
              {"shape", shape_json(state.model.params().shape)},
              {"encoder", state.model.encoder().id()},
              {"phase", meta.phase},
              {"seed", meta.seed},
              {"config_hash", meta.config_hash},
              {"epochs_completed", state.epochs_completed},
              {"parameter_count", state.model.params().parameter_count()},
              {"tensors", tensors_json(state.model.params())},
              {"optimizer",
               {{"step", state.optimizer.step},
                {"first_moment", tensors_json(state.optimizer.first_moment)},
                {"second_moment", tensors_json(state.optimizer.second_moment)}}},
              {"log", log}};
}

void save_checkpoint(const std::filesystem::path& path, const TrainingState& state, const CheckpointMeta& meta) {
  write_file(path, checkpoint_json(state, meta).dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::shared_ptr<const LanguageEncoder> encoder) {
  const json j = json::parse(read_file(path));
  if (j.value("format", "") != "masked_irl.checkpoint") throw ValidationError("not a checkpoint: " + path.string());
  if (j.at("encoder").get<std::string>() != encoder->id()) {
    throw ValidationError("checkpoint was trained with encoder " + j.at("encoder").get<std::string>() + ", not " +
                          encoder->id());
  }
  ModelShape shape;
  shape.embed_dim = j.at("shape").at("embed_dim").get<int>();
  shape.film_hidden = j.at("shape").at("film_hidden").get<int>();
  shape.hidden = j.at("shape").at("hidden").get<std::array<int, 3>>();
  Rng unused(0);
  RewardModelParams params = init_params(unused, shape);
  tensors_from(j.at("tensors"), params);
  if (!params.all_finite()) throw ValidationError("checkpoint holds non-finite parameters");

  AdamState optimizer = make_adam_state(params);
  optimizer.step = j.at("optimizer").at("step").get<long>();
  tensors_from(j.at("optimizer").at("first_moment"), optimizer.first_moment);
  tensors_from(j.at("optimizer").at("second_moment"), optimizer.second_moment);

  TrainingLog log;
  for (const auto& e : j.at("log")) {
    log.epochs.push_back(EpochLog{e.at("epoch").get<int>(), e.at("phase").get<std::string>(),
                                  e.at("irl_loss").get<double>(), e.at("mask_loss").get<double>(),
                                  e.at("total_loss").get<double>(), e.at("wall_time").get<double>()});
  }
  CheckpointMeta meta{j.at("phase").get<std::string>(), j.at("seed").get<std::uint64_t>(),
                      j.at("config_hash").get<std::string>()};
  return Checkpoint{TrainingState{RewardModel(std::move(params), std::move(encoder)), std::move(optimizer),
                                  j.at("epochs_completed").get<int>(), std::move(log)},
                    std::move(meta)};
}

}  // namespace masked_irl
