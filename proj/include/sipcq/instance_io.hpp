#pragma once

// Reader for the sectioned instance file format (docs/instance-format.md).

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "sipcq/model.hpp"

namespace sipcq {

class InstanceError : public std::runtime_error {
 public:
  InstanceError(const std::string& message, int line);
  int line() const { return line_; }

 private:
  int line_;
};

SipInstance parse_instance(std::string_view text);
SipInstance load_instance(const std::filesystem::path& file);

/// FNV-1a 64-bit digest, hex encoded.
std::string instance_digest(std::string_view text);

/// Overrides the truncation of every countable index set.
void set_truncation(SipInstance& inst, long long truncation);

}  // namespace sipcq
