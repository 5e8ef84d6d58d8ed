#pragma once

#include "kriss/mentions.hpp"
#include "kriss/rng.hpp"
#include "kriss/vocabulary.hpp"

namespace kriss {

class EntityCatalog;

/// With probability p_mask, every token strictly between [M_s] and [M_e] is
/// replaced by [MASK]; otherwise the sequence is returned unchanged.
/// Throws DataError if the sequence has no marker pair.
TokenSequence apply_mask_augmentation(TokenSequence sequence, double p_mask, Rng& rng);

/// With probability p_replace, swaps the mention for a uniformly chosen alias
/// of its entity that differs from the current mention. Contexts, offsets and
/// entity_id are kept.
MentionExample apply_replacement_augmentation(MentionExample example, const EntityCatalog& catalog, double p_replace,
                                              Rng& rng);

}  // namespace kriss
