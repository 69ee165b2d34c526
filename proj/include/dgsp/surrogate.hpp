#pragma once

// Synthetic stand-ins for the published datasets, emitted in each dataset's
// raw JSON schema with matching node, edge and snapshot counts. Used by tests
// and demos when the published files are not available locally.

#include "dgsp/adapters.hpp"

#include "json.hpp"

#include <cstdint>

namespace dgsp::surrogate {

// Raw document in the published schema for `kind`. MetraLa is emitted in the
// canonical format that its conversion recipe produces.
nlohmann::json raw_document(DatasetKind kind, std::uint64_t seed);

}  // namespace dgsp::surrogate
