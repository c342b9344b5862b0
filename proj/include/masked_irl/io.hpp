#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "masked_irl/core.hpp"
#include "masked_irl/training.hpp"
#include "masked_irl/world.hpp"

namespace masked_irl {

inline constexpr int kLayoutVersion = 1;

/// JSONL: a header record, one record per config, one per trajectory.
/// Trajectories are stored as 21 x 19 row-major doubles.
void write_bank(std::ostream& out, const TrajectoryBank& bank, std::uint64_t seed);
TrajectoryBank read_bank(std::istream& in);

/// JSONL: a header record, then one record per example.
void write_dataset(std::ostream& out, const std::vector<AnnotatedExample>& examples, std::uint64_t seed);
std::vector<AnnotatedExample> read_dataset(std::istream& in, std::uint64_t* seed = nullptr);

void save_bank(const std::filesystem::path& path, const TrajectoryBank& bank, std::uint64_t seed);
TrajectoryBank load_bank(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const std::vector<AnnotatedExample>& examples,
                  std::uint64_t seed);
std::vector<AnnotatedExample> load_dataset(const std::filesystem::path& path, std::uint64_t* seed = nullptr);

struct CheckpointMeta {
  std::string phase = "pretrain";  // phase the state belongs to
  std::uint64_t seed = 0;
  std::string config_hash;  // SHA-256 of the resolved training settings
};

/// JSON with the shape, encoder id, metadata, every tensor as a named flat
/// row-major array, the optimizer moments and the training log. Doubles are
/// written in shortest round-trip form, so loading is exact.
nlohmann::json checkpoint_json(const TrainingState& state, const CheckpointMeta& meta);
void save_checkpoint(const std::filesystem::path& path, const TrainingState& state, const CheckpointMeta& meta);

struct Checkpoint {
  TrainingState state;
  CheckpointMeta meta;
};

/// Throws ValidationError when the encoder id or a tensor shape does not
/// match.
Checkpoint load_checkpoint(const std::filesystem::path& path, std::shared_ptr<const LanguageEncoder> encoder);

/// Whole file as a string; throws ValidationError if unreadable.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace masked_irl
