// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sul/model.hpp"
#include "sul/trainer.hpp"

namespace sul {

// Stage tags carried by every checkpoint.
inline constexpr const char* kStageBaseline = "baseline";
inline constexpr const char* kStageUnlearned = "unlearned";
inline constexpr const char* kStageOracle = "oracle";
inline constexpr const char* kStageNaiveFt = "naive_ft";

struct Provenance {
  std::string stage = kStageBaseline;
  std::uint64_t seed = 0;
  std::vector<std::string> forget_subjects;  // empty when not applicable
  std::string forget_set_hash;               // empty when not applicable
};

// Flat JSON checkpoint: arch + parameter arrays + provenance. Doubles are
// emitted in shortest round-trip form, so equal states serialize to equal
// bytes and reload bit-exactly.
std::string checkpoint_to_json(const ModelState& state, const Provenance& prov);
void save_checkpoint(const std::string& path, const ModelState& state, const Provenance& prov);

struct Checkpoint {
  ModelState state;
  Provenance provenance;
};

Checkpoint checkpoint_from_json(const std::string& json_text);
Checkpoint load_checkpoint(const std::string& path);

void save_ledger(const std::string& path, const ComputeLedger& ledger);
ComputeLedger load_ledger(const std::string& path);

}  // namespace sul
