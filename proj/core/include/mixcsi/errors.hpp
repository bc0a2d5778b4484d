// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#pragma once

#include <stdexcept>
#include <string>

namespace mixcsi {

// Malformed input: bad dimensions, non-Hermitian matrices, invalid scenario values.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// The requested construction has no solution at this numerical rank
// (no null space left, rank-deficient channel matrix, ...).
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace mixcsi
