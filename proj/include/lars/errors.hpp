#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lars {

// A caller broke a documented precondition (dimension mismatch, Z <= 0, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed input file. `offset` is the byte (or line, for text formats)
// where parsing stopped.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The untruncated sampler hit its draw cap without accepting.
class SamplerStarvation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss during training.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::size_t iteration)
      : std::runtime_error(what + " at iteration " + std::to_string(iteration)), iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

#define LARS_REQUIRE(cond, msg)                                  \
  do {                                                           \
    if (!(cond)) throw ::lars::ContractViolation(std::string(msg)); \
  } while (false)

}  // namespace lars
