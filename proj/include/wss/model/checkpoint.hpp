#pragma once

#include "wss/model/net.hpp"

#include <string>

namespace wss {

// Checkpoint = <path> with concatenated little-endian f32 tensor data and
// <path>.idx, a text index of "name ndim d0..dk offset count" lines.
void save_checkpoint(const std::string& path, const Parameters& params);
Parameters load_checkpoint(const std::string& path);

} // namespace wss
