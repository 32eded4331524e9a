#pragma once

#include <stdexcept>
#include <string>

namespace elastifit {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid numeric input: nonpositive price, negative or fractional count, bad rate.
struct DomainError : Error {
  using Error::Error;
};

// Matrix or vector shapes that do not conform.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid hyperparameters or solver settings.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input files.
struct DataError : Error {
  using Error::Error;
};

// Objective grew without bound during a fit.
struct UnboundedError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// Call from inside a catch block: rethrows the active exception with `context`
// prepended to its message, keeping its type when it is one of ours.
[[noreturn]] inline void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const DomainError& e) {
    throw DomainError(context + e.what());
  } catch (const DimensionError& e) {
    throw DimensionError(context + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(context + e.what());
  } catch (const DataError& e) {
    throw DataError(context + e.what());
  } catch (const UnboundedError& e) {
    throw UnboundedError(context + e.what());
  } catch (const IoError& e) {
    throw IoError(context + e.what());
  } catch (const std::exception& e) {
    throw Error(context + e.what());
  }
}

}  // namespace elastifit
