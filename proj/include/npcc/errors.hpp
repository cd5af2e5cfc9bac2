#pragma once

#include <stdexcept>
#include <string>

namespace npcc {

/// Base class for all typed errors thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyTensor : Error {
  EmptyTensor() : Error("operation requires a non-empty tensor") {}
};

struct EmptyInput : Error {
  EmptyInput() : Error("input point cloud is empty") {}
};

struct DuplicateCoordinate : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct OverflowCoordinate : Error {
  using Error::Error;
};

struct StageOrderViolation : Error {
  using Error::Error;
};

struct StreamExhausted : Error {
  StreamExhausted() : Error("bitstream exhausted while decoding") {}
};

struct CorruptStream : Error {
  using Error::Error;
};

struct ModelMismatch : Error {
  using Error::Error;
};

struct MalformedFile : Error {
  using Error::Error;
};

struct CountMismatch : Error {
  using Error::Error;
};

struct UnsupportedEncoding : Error {
  using Error::Error;
};

struct NoOverlap : Error {
  NoOverlap() : Error("rate-distortion curves have no overlapping quality range") {}
};

struct TrainingDiverged : Error {
  using Error::Error;
};

}  // namespace npcc
