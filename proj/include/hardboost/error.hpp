#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

namespace hardboost {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised while reading a file; the message names the file and offending row.
class LoadError : public Error {
public:
    using Error::Error;
};

// Raised by validate_bundle and by operations whose preconditions fail.
class ValidationError : public Error {
public:
    using Error::Error;
};

using WarningHandler = std::function<void(const std::string&)>;

inline WarningHandler& warning_handler() {
    static WarningHandler handler = [](const std::string& msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return handler;
}

inline void warn(const std::string& msg) {
    static std::mutex mu;
    std::lock_guard lock(mu);
    if (warning_handler()) {
        warning_handler()(msg);
    }
}

// Swaps the warning handler for the lifetime of the guard.
class ScopedWarningHandler {
public:
    explicit ScopedWarningHandler(WarningHandler h) : saved_(std::move(warning_handler())) {
        warning_handler() = std::move(h);
    }
    ~ScopedWarningHandler() { warning_handler() = std::move(saved_); }
    ScopedWarningHandler(const ScopedWarningHandler&) = delete;
    ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

private:
    WarningHandler saved_;
};

}  // namespace hardboost
