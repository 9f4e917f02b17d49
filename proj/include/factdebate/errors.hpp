#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace factdebate {

// Root of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid run/taxonomy/template configuration. Raised before any backend call.
class ConfigError : public Error {
public:
    using Error::Error;
};

class TaxonomyError : public ConfigError {
public:
    TaxonomyError(std::string label, const std::string& what)
        : ConfigError(what + ": " + label), label_(std::move(label)) {}
    const std::string& label() const noexcept { return label_; }

private:
    std::string label_;
};

class UnparseableVerdict : public Error {
public:
    UnparseableVerdict() : Error("no [[verdict]] token found") {}
};

class UnknownLabel : public Error {
public:
    explicit UnknownLabel(std::string token, std::optional<std::size_t> line = std::nullopt)
        : Error(describe(token, line)), token_(std::move(token)), line_(line) {}
    const std::string& token() const noexcept { return token_; }
    std::optional<std::size_t> line() const noexcept { return line_; }

private:
    static std::string describe(const std::string& token, std::optional<std::size_t> line) {
        std::string msg = "unknown verdict label '" + token + "'";
        if (line) msg += " on line " + std::to_string(*line);
        return msg;
    }
    std::string token_;
    std::optional<std::size_t> line_;
};

class NotAFinalVerdict : public Error {
public:
    NotAFinalVerdict() : Error("follow_up_question is not a final verdict") {}
};

}  // namespace factdebate
