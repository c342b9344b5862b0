#include "masked_irl/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "masked_irl/errors.hpp"

namespace masked_irl {

namespace layout {

const std::array<std::string_view, kStateDim>& element_names() {
  static const std::array<std::string_view, kStateDim> names{
      "eef_x",   "eef_y",   "eef_z",   "R_xx",     "R_xy",     "R_xz",     "R_yx",
      "R_yy",    "R_yz",    "R_zx",    "R_zy",     "R_zz",     "human_x",  "human_y",
      "human_z", "laptop_x", "laptop_y", "laptop_z", "table_z"};
  return names;
}

}  // namespace layout

namespace {

bool finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

void put(StateVector& s, int offset, const Vec3& v) {
  s[offset] = v.x;
  s[offset + 1] = v.y;
  s[offset + 2] = v.z;
}

Vec3 get(std::span<const double> s, int offset) {
  const auto i = static_cast<std::size_t>(offset);
  return {s[i], s[i + 1], s[i + 2]};
}

}  // namespace

StateVector StateVector::from_span(std::span<const double> values) {
  if (values.size() != kStateDim) {
    throw ValidationError("state vector must have 19 entries, got " +
                          std::to_string(values.size()));
  }
  std::array<double, kStateDim> a{};
  std::copy(values.begin(), values.end(), a.begin());
  for (double v : a) {
    if (!std::isfinite(v)) throw ValidationError("state vector has a non-finite entry");
  }
  return StateVector(a);
}

std::string rotation_defect(const Eigen::Matrix3d& rotation, double tol) {
  if (!rotation.allFinite()) return "rotation has non-finite entries";
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
                           .cwiseAbs()
                           .maxCoeff();
  if (ortho > tol) {
    std::ostringstream os;
    os << "rotation is not orthonormal (max |R^T R - I| = " << ortho << ")";
    return os.str();
  }
  const double det = rotation.determinant();
  if (std::abs(det - 1.0) > tol) {
    std::ostringstream os;
    os << "rotation has determinant " << det << ", expected 1";
    return os.str();
  }
  return {};
}

StateVector pack_state(const Vec3& eef_position, const Eigen::Matrix3d& eef_rotation,
                       const Vec3& human, const Vec3& laptop, double table_z) {
  if (const auto defect = rotation_defect(eef_rotation); !defect.empty()) {
    throw ValidationError(std::string(layout::kEefRot.name) + ": " + defect);
  }
  if (!finite(eef_position)) throw ValidationError("eef_pos: non-finite position");
  if (!finite(human)) throw ValidationError("human: non-finite position");
  if (!finite(laptop)) throw ValidationError("laptop: non-finite position");
  if (!std::isfinite(table_z)) throw ValidationError("table: non-finite height");

  StateVector s;
  put(s, layout::kEefPos.offset, eef_position);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) s[layout::rotation(r, c)] = eef_rotation(r, c);
  }
  put(s, layout::kHuman.offset, human);
  put(s, layout::kLaptop.offset, laptop);
  s[layout::kTableZ] = table_z;
  return s;
}

UnpackedState unpack_state(std::span<const double> state) {
  if (state.size() != kStateDim) {
    throw ValidationError("state vector must have 19 entries, got " +
                          std::to_string(state.size()));
  }
  UnpackedState out;
  out.eef_position = get(state, layout::kEefPos.offset);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out.eef_rotation(r, c) = state[static_cast<std::size_t>(layout::rotation(r, c))];
    }
  }
  out.human = get(state, layout::kHuman.offset);
  out.laptop = get(state, layout::kLaptop.offset);
  out.table_z = state[layout::kTableZ];
  return out;
}

UnpackedState unpack_state(const StateVector& state) { return unpack_state(state.span()); }

bool Box::contains(const Vec3& p) const {
  return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
         p.z <= max.z;
}

void EnvironmentConfig::validate() const {
  if (!finite(human) || !finite(laptop) || !std::isfinite(table_z)) {
    throw ValidationError("environment config has non-finite entries");
  }
  if (laptop.z != table_z) throw ValidationError("laptop must rest on the table surface");
  if (!workspace.contains(human)) throw ValidationError("human outside workspace");
  if (!workspace.contains(laptop)) throw ValidationError("laptop outside workspace");
  if (table_z < workspace.min.z || table_z > workspace.max.z) {
    throw ValidationError("table height outside workspace");
  }
}

void EnvironmentConfig::stamp(StateVector& state) const {
  put(state, layout::kHuman.offset, human);
  put(state, layout::kLaptop.offset, laptop);
  state[layout::kTableZ] = table_z;
}

Trajectory::Trajectory(States states, EnvironmentConfig config)
    : states_(std::move(states)), config_(std::move(config)) {
  StateVector expected;
  config_.stamp(expected);
  for (const auto& s : states_) {
    for (int i = layout::kHumanX; i < kStateDim; ++i) {
      if (s[i] != expected[i]) {
        throw ValidationError("trajectory state object dims disagree with its environment config");
      }
    }
    for (double v : s.values()) {
      if (!std::isfinite(v)) throw ValidationError("trajectory has a non-finite entry");
    }
  }
}

StateMatrix Trajectory::matrix() const {
  StateMatrix m(kStateDim, kTrajectoryLength);
  for (int t = 0; t < kTrajectoryLength; ++t) m.col(t) = states_[static_cast<std::size_t>(t)].as_eigen();
  return m;
}

PreferenceWeights::PreferenceWeights(const std::array<int, kFeatureCount>& weights)
    : weights_(weights) {
  bool any = false;
  for (int w : weights_) {
    if (w < -1 || w > 1) throw ValidationError("preference weights must be in {-1, 0, +1}");
    any = any || w != 0;
  }
  if (!any) throw ValidationError("preference weights must not all be zero");
}

int PreferenceWeights::active_count() const {
  return static_cast<int>(std::count_if(weights_.begin(), weights_.end(), [](int w) { return w != 0; }));
}

std::string PreferenceWeights::to_string() const {
  std::string out;
  for (int w : weights_) out.push_back(w > 0 ? '+' : (w < 0 ? '-' : '0'));
  return out;
}

std::string_view to_string(MaskProvenance p) {
  switch (p) {
    case MaskProvenance::kOracle: return "oracle";
    case MaskProvenance::kLlm: return "llm";
    case MaskProvenance::kMock: return "mock";
  }
  return "oracle";
}

MaskProvenance mask_provenance_from_string(std::string_view s) {
  if (s == "oracle") return MaskProvenance::kOracle;
  if (s == "llm") return MaskProvenance::kLlm;
  if (s == "mock") return MaskProvenance::kMock;
  throw ValidationError("unknown mask provenance: " + std::string(s));
}

StateMask StateMask::all_ones(MaskProvenance p) {
  StateMask m;
  m.bits.fill(1);
  m.provenance = p;
  return m;
}

int StateMask::count() const {
  return static_cast<int>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

Eigen::Matrix<double, kStateDim, 1> StateMask::as_eigen() const {
  Eigen::Matrix<double, kStateDim, 1> v;
  for (int i = 0; i < kStateDim; ++i) v(i) = relevant(i) ? 1.0 : 0.0;
  return v;
}

std::string_view to_string(Ambiguity a) {
  switch (a) {
    case Ambiguity::kClear: return "clear";
    case Ambiguity::kReferentOmitted: return "referent_omitted";
    case Ambiguity::kExpressionOmitted: return "expression_omitted";
    case Ambiguity::kDisambiguated: return "disambiguated";
  }
  return "clear";
}

Ambiguity ambiguity_from_string(std::string_view s) {
  if (s == "clear") return Ambiguity::kClear;
  if (s == "referent_omitted") return Ambiguity::kReferentOmitted;
  if (s == "expression_omitted") return Ambiguity::kExpressionOmitted;
  if (s == "disambiguated") return Ambiguity::kDisambiguated;
  throw ValidationError("unknown instruction ambiguity tag: " + std::string(s));
}

void Instruction::validate() const {
  if (text.empty()) throw ValidationError("instruction text is empty");
  if ((ambiguity == Ambiguity::kClear || ambiguity == Ambiguity::kDisambiguated) &&
      (!canonical || canonical->empty())) {
    throw ValidationError("clear and disambiguated instructions need a canonical form: \"" +
                          text + "\"");
  }
}

}  // namespace masked_irl
