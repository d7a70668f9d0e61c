// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <exception>
#include <stdexcept>
#include <string>

namespace latcorr {

// Exception hierarchy. The CLI maps each kind onto a process exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    NumericError(const std::string& what, int step) : Error(what), step_(step) {}
    int step() const noexcept { return step_; }

private:
    int step_;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class PairingError : public Error {
public:
    using Error::Error;
};

// Transport failure talking to a remote service; `attempts` counts the
// connection attempts made before giving up.
class ConnectivityError : public Error {
public:
    ConnectivityError(const std::string& what, int attempts) : Error(what), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

class ProtocolError : public Error {
public:
    ProtocolError(const std::string& what, int code = 0) : Error(what), code_(code) {}
    int code() const noexcept { return code_; }

private:
    int code_;
};

// Process exit codes. Data-level inconsistencies (shape, pairing, format)
// count as I/O failures; only flag/config problems are usage errors.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitNumeric = 2, kExitIo = 3, kExitRemote = 4 };

inline int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const ParameterError*>(&e)) return kExitUsage;
    if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
    if (dynamic_cast<const ConnectivityError*>(&e) || dynamic_cast<const ProtocolError*>(&e)) return kExitRemote;
    return kExitIo;
}

inline const char* error_kind(const std::exception& e) noexcept {
    if (dynamic_cast<const ParameterError*>(&e)) return "parameter";
    if (dynamic_cast<const NumericError*>(&e)) return "numeric";
    if (dynamic_cast<const ConnectivityError*>(&e)) return "connectivity";
    if (dynamic_cast<const ProtocolError*>(&e)) return "protocol";
    if (dynamic_cast<const ShapeError*>(&e)) return "shape";
    if (dynamic_cast<const FormatError*>(&e)) return "format";
    if (dynamic_cast<const PairingError*>(&e)) return "pairing";
    if (dynamic_cast<const IoError*>(&e)) return "io";
    return "internal";
}

}  // namespace latcorr
