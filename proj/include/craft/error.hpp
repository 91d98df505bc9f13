#pragma once

#include <stdexcept>
#include <string>

namespace craft {

// Base of every error raised by the library. Catch this to handle any
// failure coming out of craft code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed text (cell names, action lines, verdicts, JSON documents).
class ParseError : public Error {
 public:
  using Error::Error;
};

// A squeeze that cannot be executed on the given field.
class InvalidAction : public Error {
 public:
  using Error::Error;
};

// Displaced clay found no free capacity anywhere in the workspace.
class OverflowError : public Error {
 public:
  using Error::Error;
};

// The scripted planner could not find a strictly improving action.
class NoImprovement : public Error {
 public:
  using Error::Error;
};

// Network-level failure talking to an LLM endpoint.
class TransportError : public Error {
 public:
  using Error::Error;
};

class HttpStatusError : public TransportError {
 public:
  HttpStatusError(int status, const std::string& body)
      : TransportError("HTTP status " + std::to_string(status) + ": " + body),
        status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace craft
