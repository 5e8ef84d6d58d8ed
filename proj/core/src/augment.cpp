#include "kriss/augment.hpp"

#include <algorithm>

#include "kriss/error.hpp"
#include "kriss/ontology.hpp"

namespace kriss {

TokenSequence apply_mask_augmentation(TokenSequence sequence, double p_mask, Rng& rng) {
  auto start = std::find(sequence.begin(), sequence.end(), token::mention_start);
  auto end = std::find(start, sequence.end(), token::mention_end);
  if (start == sequence.end() || end == sequence.end()) throw DataError("sequence has no [M_s] ... [M_e] span");
  if (bernoulli(rng, p_mask)) std::fill(start + 1, end, token::mask);
  return sequence;
}

MentionExample apply_replacement_augmentation(MentionExample example, const EntityCatalog& catalog, double p_replace,
                                              Rng& rng) {
  const Entity& entity = catalog.at(example.entity_id);
  std::vector<const std::string*> choices;
  for (const auto& a : entity.aliases) {
    if (a != example.mention) choices.push_back(&a);
  }
  if (choices.empty()) return example;
  if (bernoulli(rng, p_replace)) example.mention = *choices[uniform_index(rng, choices.size())];
  return example;
}

}  // namespace kriss
