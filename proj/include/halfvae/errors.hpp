#pragma once

#include <stdexcept>
#include <string>

namespace halfvae {

// Base of every error the library throws. The CLI maps each category to an
// exit code (config 2, numeric 3, io 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// M < N: more sources than observed channels.
class UnderdeterminedError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DegenerateInputError : public DomainError {
 public:
  using DomainError::DomainError;
};

class SizeLimitError : public DomainError {
 public:
  using DomainError::DomainError;
};

}  // namespace halfvae
