#pragma once

#include <stdexcept>
#include <string>

namespace relayfl {

/// Input outside an operation's mathematical domain.
class DomainError : public std::domain_error {
public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// A zero channel coefficient where channel inversion is required.
class SingularChannelError : public DomainError {
public:
  explicit SingularChannelError(const std::string& what) : DomainError(what) {}
};

/// All local updates were identical constants, so the global spread is zero.
class DegenerateUpdateError : public DomainError {
public:
  explicit DegenerateUpdateError(const std::string& what) : DomainError(what) {}
};

/// Invalid experiment configuration; the message carries the key path.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace relayfl
