#pragma once

#include <stdexcept>
#include <string>

namespace glmm {

/// Base error carrying the module that raised it.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(std::move(module))
    {
    }

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

/// Bad input: a precondition on user-supplied data does not hold.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical stage could not produce a result (degenerate mesh, solver failure).
class ComputeError : public Error {
public:
    using Error::Error;
};

} // namespace glmm
