#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace steklov {

enum class ErrorCode {
    invalid_spec,
    degenerate_mesh,
    parse_error,
    orientation,
    non_manifold,
    disconnected,
    duplicate_vertex,
    invalid_input,
    invalid_metric,
    invalid_density,
    solver_failure,
    undefined_quotient,
    invalid_annulus,
    invalid_family,
    truncation,
    out_of_regime,
    incomplete_report,
    io_error,
};

constexpr std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::invalid_spec: return "invalid-spec";
    case ErrorCode::degenerate_mesh: return "degenerate-mesh";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::orientation: return "orientation";
    case ErrorCode::non_manifold: return "non-manifold";
    case ErrorCode::disconnected: return "disconnected";
    case ErrorCode::duplicate_vertex: return "duplicate-vertex";
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::invalid_metric: return "invalid-metric";
    case ErrorCode::invalid_density: return "invalid-density";
    case ErrorCode::solver_failure: return "solver-failure";
    case ErrorCode::undefined_quotient: return "undefined-quotient";
    case ErrorCode::invalid_annulus: return "invalid-annulus";
    case ErrorCode::invalid_family: return "invalid-family";
    case ErrorCode::truncation: return "truncation";
    case ErrorCode::out_of_regime: return "out-of-regime";
    case ErrorCode::incomplete_report: return "incomplete-report";
    case ErrorCode::io_error: return "io-error";
    }
    return "unknown";
}

/// Every failure in the library is reported through this type; `code()`
/// distinguishes the cause so callers can branch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what)
        , code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace steklov
