#pragma once

#include <string>

#include "vdan/model.hpp"

namespace vdan {

// Versioned binary checkpoint: magic "VDAN", version u32, config echo
// (C, T, S, D, T', r_c, r_t, hidden widths) as u32, then every named
// parameter tensor as (name length, name bytes, rank, extents, float64
// payload). Round-trips are bit-exact.
void save_checkpoint(const std::string& path, const Model& model);

// Fills the parameters of a model already built with the matching variant and
// config; throws on magic/version/config/name/shape disagreement.
void load_checkpoint(const std::string& path, Model& model);

}  // namespace vdan
