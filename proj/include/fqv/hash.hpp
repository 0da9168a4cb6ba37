#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fqv {

// SHA-1 of a byte string, lowercase hex.
std::string sha1_hex(std::string_view data);

// Git-style blob hash: sha1("blob <size>\0" + data).  Matches `git hash-object`
// for regular files, so report hashes can be cross-checked with git tooling.
std::string content_hash(std::string_view data);

}  // namespace fqv
