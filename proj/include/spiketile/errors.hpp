#pragma once

#include <stdexcept>
#include <string>

namespace spiketile {

/// Base of every exception thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// API precondition violated by the caller (mismatched sizes, bad handles).
struct ContractError : Error {
  using Error::Error;
};

/// User-supplied values are out of range or malformed (non-finite input,
/// horizon over the hardware cap, non-integer current in integer mode).
struct InputError : Error {
  using Error::Error;
};

/// A file's content does not match its grammar. Message carries
/// "file:line:" or a byte offset where applicable.
struct ParseError : Error {
  using Error::Error;
};

/// The network cannot be expressed in the tile memory format.
struct CompileError : Error {
  using Error::Error;
};

/// Filesystem operation failed.
struct IoError : Error {
  using Error::Error;
};

/// Training run diverged or was configured inconsistently.
struct TrainError : Error {
  using Error::Error;
};

/// The cycle model hit a condition real hardware would flag as a fault
/// (synchronization FIFO overflow, output memory overrun).
struct SimFault : Error {
  using Error::Error;
};

}  // namespace spiketile
