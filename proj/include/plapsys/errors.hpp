#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace plapsys {

/// Base class for everything the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A problem instance violates a parameter rule. `key()` names the offending field.
class ValidationError : public Error {
public:
    ValidationError(std::string key, const std::string& what)
        : Error(key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Malformed problem config. Carries the key path and the 1-based line (0 if unknown).
class ConfigError : public Error {
public:
    ConfigError(std::string key_path, int line, const std::string& what)
        : Error(format(key_path, line, what)), key_path_(std::move(key_path)), line_(line) {}
    const std::string& key_path() const noexcept { return key_path_; }
    int line() const noexcept { return line_; }

private:
    static std::string format(const std::string& key, int line, const std::string& what) {
        std::string s = "config error";
        if (!key.empty()) s += " at '" + key + "'";
        if (line > 0) s += " (line " + std::to_string(line) + ")";
        return s + ": " + what;
    }
    std::string key_path_;
    int line_;
};

/// Bad argument to a numerical operation (zero field, empty grid, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// An iterative method ran out of budget. The last iterate is kept for inspection.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, Eigen::VectorXd last_iterate = {})
        : Error(what), last_(std::move(last_iterate)) {}
    const Eigen::VectorXd& last_iterate() const noexcept { return last_; }

private:
    Eigen::VectorXd last_;
};

}  // namespace plapsys
