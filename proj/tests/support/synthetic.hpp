#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "labnet/dataset.hpp"

namespace labnet::testing {

// Textured scene with a darkened, tinted region. The shadow image is the
// shadow-free image scaled by per-channel factors inside the mask, with a
// two pixel penumbra just inside the mask edge.
ShadowTriple synthetic_triple(int64_t size, uint64_t seed);
std::vector<ShadowTriple> synthetic_set(int64_t count, int64_t size, uint64_t seed);

// Writes the triples as PNGs under layout's directories for the split. Masks
// are stored as black/white RGB.
void write_dataset(const DatasetLayout& layout, const std::string& split,
                   const std::vector<ShadowTriple>& triples);

}  // namespace labnet::testing
