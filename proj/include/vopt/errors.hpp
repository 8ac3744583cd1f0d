#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vopt {

/// Base of every error raised by the library. The CLI maps subclasses to
/// exit codes via exit_code().
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

class SyntaxError : public Error {
public:
    SyntaxError(std::size_t position, std::vector<std::string> expected, const std::string& found);

    std::size_t position() const noexcept { return position_; }
    const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    std::size_t position_;
    std::vector<std::string> expected_;
};

class UnknownVariable : public Error {
public:
    explicit UnknownVariable(std::string name);
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

class DomainError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class NondifferentiablePoint : public DomainError {
public:
    using DomainError::DomainError;
};

class NonConvergent : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

class NumericalBreakdown : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Problem-file error with a 1-based line and column.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& what);
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class EmptyObjectives : public Error {
public:
    EmptyObjectives() : Error("problem declares no objectives ('min' lines)") {}
};

class BadBounds : public Error {
public:
    using Error::Error;
};

class InfeasiblePoint : public Error {
public:
    InfeasiblePoint(std::size_t constraint, double value);
    int exit_code() const noexcept override { return 2; }
    std::size_t constraint() const noexcept { return constraint_; }
    double value() const noexcept { return value_; }

private:
    std::size_t constraint_;
    double value_;
};

class NotCritical : public Error {
public:
    using Error::Error;
};

class MissingSecondDerivative : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class NoFeasiblePointInBox : public Error {
public:
    NoFeasiblePointInBox() : Error("no feasible grid point in the variable box") {}
    int exit_code() const noexcept override { return 2; }
};

}  // namespace vopt
