#pragma once

#include <stdexcept>
#include <string>

namespace flowloc {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input files or documents that do not satisfy their schema or invariants.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A structurally valid graph that violates a modelling assumption.
class GraphError : public Error {
 public:
  using Error::Error;
};

// Parameters outside their documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Enumeration would exceed its configured entry cap.
class HorizonTooLarge : public Error {
 public:
  using Error::Error;
};

// Invalid command invocation or experiment configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace flowloc
