#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace hsd {

// SHA-256 of a byte string, as a lowercase hex digest.
std::string sha256_hex(std::string_view data);

}  // namespace hsd
