#pragma once

#include <stdexcept>
#include <string>

namespace himap {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorKind { usage = 1, data = 2, check = 3, internal = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string msg)
      : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace himap
