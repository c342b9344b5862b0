#include <set>
#include <vector>

#include "doctest.h"
#include "masked_irl/core.hpp"
#include "masked_irl/errors.hpp"
#include "masked_irl/rng.hpp"

using namespace masked_irl;

namespace {

Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q.normalized().toRotationMatrix();
}

Vec3 random_vec(Rng& rng) { return {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)}; }

}  // namespace

TEST_CASE("pack_state identity case") {
  const StateVector s = pack_state({}, Eigen::Matrix3d::Identity(), {}, {}, 0.0);
  const std::array<double, kStateDim> expected{0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0};
  CHECK(s.values() == expected);
}

TEST_CASE("pack/unpack round trip is bitwise exact") {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const Vec3 eef = random_vec(rng), human = random_vec(rng), laptop = random_vec(rng);
    const Eigen::Matrix3d rot = random_rotation(rng);
    const double table = rng.uniform(0, 1);
    const StateVector s = pack_state(eef, rot, human, laptop, table);
    const UnpackedState u = unpack_state(s);
    CHECK(u.eef_position == eef);
    CHECK(u.eef_rotation == rot);
    CHECK(u.human == human);
    CHECK(u.laptop == laptop);
    CHECK(u.table_z == table);
    CHECK(pack_state(u.eef_position, u.eef_rotation, u.human, u.laptop, u.table_z) == s);
  }
}

TEST_CASE("reflections are rejected and the error names the rotation block") {
  Eigen::Matrix3d reflect = Eigen::Matrix3d::Identity();
  reflect(2, 2) = -1.0;
  try {
    pack_state({}, reflect, {}, {}, 0.0);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("eef_rot") != std::string::npos);
  }
  Eigen::Matrix3d skewed = Eigen::Matrix3d::Identity();
  skewed(0, 1) = 0.01;
  CHECK_THROWS_AS(pack_state({}, skewed, {}, {}, 0.0), ValidationError);
}

TEST_CASE("unpack_state validates length and keeps the table at index 18") {
  std::vector<double> short_state(18, 0.0);
  CHECK_THROWS_AS(unpack_state(std::span<const double>(short_state)), ValidationError);
  std::vector<double> full(19, 0.0);
  full[18] = 0.73;
  CHECK(unpack_state(std::span<const double>(full)).table_z == 0.73);
  CHECK(layout::kTableZ == 18);
}

TEST_CASE("layout registry covers 0..18 with disjoint blocks") {
  std::set<int> seen;
  int total = 0;
  for (const auto& block : layout::kBlocks) {
    for (int i = block.offset; i < block.offset + block.size; ++i) {
      CHECK(seen.insert(i).second);
    }
    total += block.size;
  }
  CHECK(total == kStateDim);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == kStateDim - 1);
  CHECK(layout::element_names().size() == static_cast<std::size_t>(kStateDim));
  CHECK(layout::element_names()[layout::rotation(2, 0)] == "R_zx");
}

TEST_CASE("environment config and trajectory invariants") {
  EnvironmentConfig config;
  config.workspace = {{-1, -1, 0}, {1, 1, 2}};
  config.table_z = 0.7;
  config.laptop = {0.1, 0.2, 0.7};
  config.human = {0.8, 0.0, 1.1};
  CHECK_NOTHROW(config.validate());

  EnvironmentConfig floating = config;
  floating.laptop.z = 0.9;
  CHECK_THROWS_AS(floating.validate(), ValidationError);

  Trajectory::States states;
  for (auto& s : states) {
    s = pack_state({0, 0, 1}, Eigen::Matrix3d::Identity(), config.human, config.laptop, config.table_z);
  }
  CHECK_NOTHROW(Trajectory(states, config));
  states[5][layout::kHumanX] += 0.1;
  CHECK_THROWS_AS(Trajectory(states, config), ValidationError);
}

TEST_CASE("preference weights") {
  CHECK_THROWS_AS(PreferenceWeights({0, 0, 0, 0, 0}), ValidationError);
  CHECK_THROWS_AS(PreferenceWeights({2, 0, 0, 0, 0}), ValidationError);
  const PreferenceWeights w({1, 0, -1, 0, 0});
  CHECK(w.active_count() == 2);
  CHECK(w.to_string() == "+0-00");
}

TEST_CASE("instruction validation") {
  Instruction clear{"Stay away from the laptop", Ambiguity::kClear, std::nullopt};
  CHECK_THROWS_AS(clear.validate(), ValidationError);
  clear.canonical = CanonicalForm{{2, -1}};
  CHECK_NOTHROW(clear.validate());
  Instruction vague{"Stay away", Ambiguity::kReferentOmitted, std::nullopt};
  CHECK_NOTHROW(vague.validate());
  CHECK(vague.is_ambiguous());
}
