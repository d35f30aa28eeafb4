#pragma once

#include <stdexcept>
#include <string>

namespace mia {

// Input outside the mathematical domain of an operation (e.g. polar latitude).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid configuration or argument detected before any work is done.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or incomplete external data (metadata payloads, OSM documents,
// manifests).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejected credentials. Never retried.
class CredentialError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transport failure that survived every retry.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mia
