#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace steerdec {

// Base class for every error raised by this library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// normalize() received a vector with (numerically) no mass.
class ZeroMassError : public Error {
  public:
    using Error::Error;
};

class EmptyCorpusError : public Error {
  public:
    using Error::Error;
};

// A training loop produced a non-finite loss.
class DivergedLossError : public Error {
  public:
    using Error::Error;
};

class ShapeMismatchError : public Error {
  public:
    using Error::Error;
};

// The two distributions handed to combine() live on different supports.
class SubsetMismatchError : public Error {
  public:
    using Error::Error;
};

class VocabMismatchError : public Error {
  public:
    using Error::Error;
};

class DegenerateLabelsError : public Error {
  public:
    using Error::Error;
};

class RaggedInputError : public Error {
  public:
    using Error::Error;
};

class EmptyInputError : public Error {
  public:
    using Error::Error;
};

// External scorer endpoint could not be reached; carries the retry count.
class TransportError : public Error {
  public:
    TransportError(const std::string& msg, int retries)
        : Error(msg + " (after " + std::to_string(retries) + " attempts)"), retries_(retries) {}
    int retries() const { return retries_; }

  private:
    int retries_;
};

class MalformedResponseError : public Error {
  public:
    using Error::Error;
};

class OutOfRangeScoreError : public Error {
  public:
    using Error::Error;
};

// Input file could not be parsed; carries the 1-based line number.
class ParseError : public Error {
  public:
    ParseError(const std::string& msg, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

class IoError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

// A soft-prompt checkpoint was loaded against a backbone it was not tuned on.
class FingerprintMismatchError : public Error {
  public:
    using Error::Error;
};

}  // namespace steerdec
