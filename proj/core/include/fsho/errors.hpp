#pragma once

#include <stdexcept>
#include <string>

namespace fsho {

// Base for every error raised by the library. Callers that only need to
// report failures can catch this; the subclasses exist so tests and the CLI
// can tell a bad config apart from a protocol misuse.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Step called out of turn (high/low alternation broken, or episode over).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// FS index outside the set allowed for that turn.
class ActionError : public Error {
 public:
  using Error::Error;
};

/// Shape or precondition mismatch in the learning stack.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Delay requested for a user that is not being served this timestep.
class NoDelayError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fsho
