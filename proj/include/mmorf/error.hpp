#pragma once

#include <stdexcept>
#include <string>

namespace mmorf {

enum class Errc {
  // chemworld
  empty_molecule,
  illegal_character,
  no_reactants,
  malformed_pattern,
  length_mismatch,
  parse_error,
  schema_violation,
  // vfdsl
  syntax_error,
  unknown_component,
  forbidden_operator,
  bad_argument,
  division_by_zero,
  // planner
  purchasable_target,
  unknown_system,
  frontier_empty,
  incomplete_assignment,
  // agents
  unknown_template,
  missing_placeholder,
  no_action_found,
  unknown_tool,
  malformed_arguments,
  disallowed_tool,
  scenario_exhausted,
  http_error,
  timeout,
  // evalbench
  invalid_route,
  unknown_constraint_type,
  malformed_entry,
  budget_exceeded,
  not_found,
  // generic
  invalid_argument,
};

const char* errc_name(Errc code);

/// Library-wide exception carrying a stable error code plus a human message.
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mmorf
