#include "masked_irl/errors.hpp"
#include "masked_irl/training.hpp"

namespace masked_irl {

namespace {

MaskProvenance provenance_of(const LlmClient& client) {
  return client.provider != nullptr ? client.provider->provenance() : MaskProvenance::kLlm;
}

void set_mask(AnnotatedExample& ex, std::size_t index, const LlmClient& client,
              std::vector<AnnotationFailure>* failures) {
  try {
    ex.mask = predict_mask(ex.instruction.text, client);
  } catch (const AnnotationError& e) {
    ex.mask = StateMask::all_ones(provenance_of(client));
    ex.annotation_failed = true;
    if (failures) failures->push_back({index, "mask", ex.instruction.text, e.what()});
  }
}

}  // namespace

void annotate_masks(std::vector<AnnotatedExample>& dataset, const LlmClient& client,
                    std::vector<AnnotationFailure>* failures) {
  for (std::size_t i = 0; i < dataset.size(); ++i) set_mask(dataset[i], i, client, failures);
}

std::vector<AnnotatedExample> augment_with_disambiguations(const std::vector<AnnotatedExample>& dataset,
                                                           const TrajectoryBank& bank, const LlmClient& client,
                                                           std::vector<AnnotationFailure>* failures,
                                                           std::vector<std::vector<Instruction>>* candidates_out) {
  std::vector<AnnotatedExample> out;
  out.reserve(dataset.size());
  if (candidates_out) candidates_out->assign(dataset.size(), {});
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const AnnotatedExample& ex = dataset[i];
    if (!ex.instruction.is_ambiguous()) {
      out.push_back(ex);
      continue;
    }
    const Trajectory& reference = bank.group(ex.config_id, ex.pair_id).reference();
    std::vector<Instruction> candidates;
    try {
      candidates = disambiguate(ex.instruction, ex.trajectory, reference, client);
    } catch (const AnnotationError& e) {
      if (failures) failures->push_back({i, "disambiguation", ex.instruction.text, e.what()});
      AnnotatedExample kept = ex;
      set_mask(kept, i, client, failures);
      kept.annotation_failed = true;
      out.push_back(std::move(kept));
      continue;
    }
    if (candidates_out) (*candidates_out)[i] = candidates;
    for (auto& candidate : candidates) {
      AnnotatedExample augmented = ex;
      augmented.original = ex.instruction;
      augmented.instruction = std::move(candidate);
      augmented.annotation_failed = false;
      set_mask(augmented, i, client, failures);
      out.push_back(std::move(augmented));
    }
  }
  return out;
}

}  // namespace masked_irl
