#pragma once

#include <stdexcept>
#include <string>

namespace bsgat {

// Bad input: config, CLI arguments, malformed files, missing paths.
// The CLI maps this to exit status 2; everything else exits 1.
class user_error : public std::runtime_error {
public:
  explicit user_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bsgat
