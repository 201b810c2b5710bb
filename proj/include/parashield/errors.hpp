#ifndef PARASHIELD_ERRORS_HPP_
#define PARASHIELD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace parashield {

/* Base of every error raised by the library. The CLI maps any of these to a
 * nonzero exit status with the message as the diagnostic line. */
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class PointOutOfDomain : public Error {
public:
  using Error::Error;
};

class GridMismatch : public Error {
public:
  using Error::Error;
};

class UniverseMismatch : public Error {
public:
  using Error::Error;
};

class EmptyActiveSet : public Error {
public:
  using Error::Error;
};

/* The queried cell is outside the shield's domain: the safety guarantee is
 * lost and the caller must pick a failsafe. */
class DomainViolation : public Error {
public:
  using Error::Error;
};

class GenerationFailed : public Error {
public:
  using Error::Error;
};

/* Malformed or mismatched file content (bad magic, truncated stream, hash
 * mismatch, unparsable world record). */
class FormatError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace parashield

#endif // PARASHIELD_ERRORS_HPP_
