#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dice/dice.hpp"

namespace dice {

// Binary record codec. Layout is little-endian and documented in docs/record-format.md;
// the round trip is lossless (bit-identical doubles, identical edit outputs).
std::vector<std::uint8_t> record_to_bytes(const InversionRecord& rec);
InversionRecord record_from_bytes(const std::vector<std::uint8_t>& bytes);

// File wrappers. Throw IoError on filesystem failures, truncation, bad magic, or
// structural nonsense; NumericError when stored fields contain non-finite values.
void write_record(const InversionRecord& rec, const std::string& path);
InversionRecord read_record(const std::string& path);

} // namespace dice
