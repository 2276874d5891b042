// SPDX-License-Identifier: Apache-2.0

#ifndef MMSL_ERRORS_HPP
#define MMSL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mmsl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define MMSL_DEFINE_ERROR(Name)     \
  struct Name : Error {             \
    using Error::Error;             \
  }

// imaging-core
MMSL_DEFINE_ERROR(IoError);
MMSL_DEFINE_ERROR(DecodeError);
MMSL_DEFINE_ERROR(OutOfBounds);
MMSL_DEFINE_ERROR(SizeMismatch);

// augment-ops
MMSL_DEFINE_ERROR(InvalidMagnitude);

// mmsl-pipeline
MMSL_DEFINE_ERROR(DegenerateGrid);
MMSL_DEFINE_ERROR(InvalidCount);
MMSL_DEFINE_ERROR(InvalidConfig);

// dataset-io
MMSL_DEFINE_ERROR(MalformedFilename);
MMSL_DEFINE_ERROR(InsufficientIdentities);

// reid-eval
MMSL_DEFINE_ERROR(DimensionMismatch);
MMSL_DEFINE_ERROR(ZeroVector);
MMSL_DEFINE_ERROR(ShapeMismatch);
MMSL_DEFINE_ERROR(NoValidQuery);
MMSL_DEFINE_ERROR(FormatError);
MMSL_DEFINE_ERROR(CountMismatch);

#undef MMSL_DEFINE_ERROR

}  // namespace mmsl

#endif  // MMSL_ERRORS_HPP
