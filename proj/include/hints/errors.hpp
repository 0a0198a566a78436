#ifndef HINTS_ERRORS_HPP
#define HINTS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hints {

// Base class for all library errors. Subclasses identify the offending
// location (row/column, variable index, ...) in both fields and message.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// ---- ingestion -------------------------------------------------------------

class EmptyFile : public Error {
public:
    explicit EmptyFile(const std::string& path)
        : Error("empty or headerless CSV file: " + path) {}
};

class MissingColumn : public Error {
public:
    MissingColumn(const std::string& column, const std::string& path)
        : Error("column '" + column + "' not found in " + path), column(column) {}
    std::string column;
};

class NonNumericCell : public Error {
public:
    NonNumericCell(std::size_t row, std::size_t col, const std::string& text)
        : Error("non-numeric cell at row " + std::to_string(row) + ", col " +
                std::to_string(col) + ": '" + text + "'"),
          row(row), col(col) {}
    std::size_t row; // 1-based data row (header excluded)
    std::size_t col; // 1-based mapped column
};

// ---- shapes and ranges -----------------------------------------------------

class SeriesTooShort : public Error {
public:
    SeriesTooShort(std::size_t T, std::size_t L, std::size_t h)
        : Error("series too short: T=" + std::to_string(T) + " < L+h=" +
                std::to_string(L + h)),
          T(T), L(L), h(h) {}
    std::size_t T, L, h;
};

class ConstantVariable : public Error {
public:
    explicit ConstantVariable(std::size_t d)
        : Error("variable " + std::to_string(d) + " is constant on the fit range"),
          variable(d) {}
    std::size_t variable;
};

class PeriodTooLarge : public Error {
public:
    PeriodTooLarge(std::size_t T, std::size_t period)
        : Error("period " + std::to_string(period) + " too large for series length " +
                std::to_string(T) + " (need T >= 2*period)"),
          T(T), period(period) {}
    std::size_t T, period;
};

class DegenerateVariable : public Error {
public:
    explicit DegenerateVariable(std::size_t d)
        : Error("residual variable " + std::to_string(d) + " has zero variance"),
          variable(d) {}
    std::size_t variable;
};

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& what) : Error("shape mismatch: " + what) {}
};

// ---- checkpoints -----------------------------------------------------------

class CorruptCheckpoint : public Error {
public:
    explicit CorruptCheckpoint(const std::string& why)
        : Error("corrupt checkpoint: " + why) {}
};

class VersionMismatch : public Error {
public:
    explicit VersionMismatch(const std::string& why)
        : Error("checkpoint mismatch: " + why) {}
};

// ---- misc ------------------------------------------------------------------

class UnknownVariable : public Error {
public:
    explicit UnknownVariable(const std::string& name)
        : Error("unknown variable: " + name) {}
};

class EmptyTestSet : public Error {
public:
    EmptyTestSet() : Error("evaluation window set is empty") {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error(msg) {}
};

class ConfigConflict : public Error {
public:
    explicit ConfigConflict(const std::string& msg) : Error(msg) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

} // namespace hints

#endif
