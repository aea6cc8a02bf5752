#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agcl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t position)
      : Error(msg + " at offset " + std::to_string(position)), position_(position) {}
  std::size_t position() const noexcept { return position_; }
  const char* kind() const noexcept override { return "parse_error"; }

 private:
  std::size_t position_;
};

class UnknownAtomError : public Error {
 public:
  explicit UnknownAtomError(const std::string& atom)
      : Error("unknown atomic proposition '" + atom + "'"), atom_(atom) {}
  const std::string& atom() const noexcept { return atom_; }
  const char* kind() const noexcept override { return "unknown_atom"; }

 private:
  std::string atom_;
};

class ResourceLimitError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "resource_limit"; }
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "infeasible"; }
};

class UnsatisfiableError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "unsatisfiable"; }
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& path, const std::string& msg)
      : Error(path.empty() ? msg : path + ": " + msg), path_(path) {}
  const std::string& path() const noexcept { return path_; }
  const char* kind() const noexcept override { return "schema_error"; }

 private:
  std::string path_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "precondition"; }
};

class NumericalError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numerical"; }
};

}  // namespace agcl
