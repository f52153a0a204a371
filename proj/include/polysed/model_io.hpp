#pragma once

#include <filesystem>
#include <iosfwd>

#include "polysed/network.hpp"

namespace polysed {

/// POLYSED-MODEL v1 container:
///   line 1: `POLYSED-MODEL v1`
///   line 2: `meta <n>` followed by n bytes of JSON (architecture, class map,
///           tensor names and sizes, configuration snapshot)
///   then little-endian float64: normalizer means, normalizer std devs, and
///   every parameter tensor in canonical order.
void write_model(std::ostream& os, const BlstmNetwork& net);
BlstmNetwork read_model(std::istream& is);

void save_model(const std::filesystem::path& path, const BlstmNetwork& net);
BlstmNetwork load_model(const std::filesystem::path& path);

}  // namespace polysed
