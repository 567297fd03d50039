// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace sul {

// Error categories. These map 1:1 onto the C API status codes and onto the
// CLI exit-code convention (config/parameter problems vs. runtime failures).
enum class ErrorCode {
  Param,      // invalid argument value or precondition violation
  Data,       // dataset is unusable for the requested operation
  Io,         // file read/write failure
  Arch,       // tensor/shape mismatch
  Hygiene,    // split-hygiene violation (eval data requested in a train path)
  Freeze,     // frozen-backbone mismatch
  Partition,  // retained/forgotten clip sets overlap or do not cover
  Lookup,     // unknown subject or clip id
  Ingest,     // malformed input file content
  Config,     // malformed scenario config
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace sul
