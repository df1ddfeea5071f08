#pragma once

#include <string>
#include <vector>

#include "mmorf/error.hpp"

namespace mmorf {

struct Constraint {
  enum class Type { carcinogen, pyrophoric, user };
  Type type = Type::carcinogen;
  std::vector<std::string> molecules;  // user constraints only
};

const char* constraint_type_name(Constraint::Type type);
Constraint::Type constraint_type_from_string(const std::string& name);

struct Task {
  std::string id;
  std::string product;
  std::string mode = "scmo";  // "hcmo" or "scmo"
  std::vector<Constraint> constraints;
  std::string instruction;
};

/// Instruction text as shown to agents: the task instruction plus a
/// machine-readable hard-constraint summary when constraints exist.
std::string task_context_text(const Task& task);

Task task_from_json_text(const std::string& text);
Task load_task(const std::string& path);

std::vector<Task> load_benchmark(const std::string& path);

}  // namespace mmorf
