#pragma once

#include <stdexcept>
#include <string>

namespace bivwind {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model, spline or scenario configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or out-of-range input data.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Distribution parameters outside their admissible domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A predictor block whose (penalized) design is not of full column rank.
class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(std::string block, const std::string& detail)
      : Error("rank-deficient design in block '" + block + "': " + detail),
        block_(std::move(block)) {}

  const std::string& block() const noexcept { return block_; }

 private:
  std::string block_;
};

/// Skill score requested against a zero reference score.
class UndefinedSkillError : public Error {
 public:
  using Error::Error;
};

}  // namespace bivwind
