// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace slicefl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or dimensions that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition on arguments or call order was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A one-time pad was presented for a second masking operation.
class MaskReuseError : public Error {
 public:
  using Error::Error;
};

/// Plaintext reached the untrusted domain while strict auditing was enabled.
class SecurityBreach : public Error {
 public:
  using Error::Error;
};

/// Message sequencing between clients and server went wrong.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Malformed frame, checkpoint, dataset or config file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace slicefl
