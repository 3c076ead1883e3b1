#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace himap {

// Binary portable graymap (P5), 8-bit.
void write_pgm(const std::string& path, const std::vector<uint8_t>& pixels, int h, int w);
std::vector<uint8_t> read_pgm(const std::string& path, int* h_out, int* w_out);

}  // namespace himap
