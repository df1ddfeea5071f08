#include "mmorf/tasks.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mmorf {

using nlohmann::json;

const char* constraint_type_name(Constraint::Type type) {
  switch (type) {
    case Constraint::Type::carcinogen: return "carcinogen";
    case Constraint::Type::pyrophoric: return "pyrophoric";
    case Constraint::Type::user: return "user";
  }
  return "?";
}

Constraint::Type constraint_type_from_string(const std::string& name) {
  if (name == "carcinogen") return Constraint::Type::carcinogen;
  if (name == "pyrophoric") return Constraint::Type::pyrophoric;
  if (name == "user") return Constraint::Type::user;
  raise(Errc::schema_violation, "unknown constraint type '" + name + "'");
}

std::string task_context_text(const Task& task) {
  std::string out = task.instruction;
  if (task.constraints.empty()) return out;
  if (!out.empty()) out += "\n";
  out += "Hard constraints:";
  for (const Constraint& c : task.constraints) {
    switch (c.type) {
      case Constraint::Type::carcinogen:
        out += " avoid carcinogenic substances.";
        break;
      case Constraint::Type::pyrophoric:
        out += " avoid pyrophoric substances.";
        break;
      case Constraint::Type::user: {
        out += " avoid user-specified molecules: [";
        for (std::size_t i = 0; i < c.molecules.size(); ++i) {
          if (i) out += ", ";
          out += c.molecules[i];
        }
        out += "].";
        break;
      }
    }
  }
  return out;
}

namespace {

Task task_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) raise(Errc::schema_violation, where + ": task must be an object");
  Task task;
  if (!j.contains("id") || !j.at("id").is_string()) {
    raise(Errc::schema_violation, where + ": missing string 'id'");
  }
  task.id = j.at("id").get<std::string>();
  if (!j.contains("product") || !j.at("product").is_string() ||
      j.at("product").get<std::string>().empty()) {
    raise(Errc::schema_violation, where + ": missing string 'product'");
  }
  task.product = j.at("product").get<std::string>();
  if (j.contains("mode")) {
    task.mode = j.at("mode").get<std::string>();
    if (task.mode != "hcmo" && task.mode != "scmo") {
      raise(Errc::schema_violation, where + ": mode must be 'hcmo' or 'scmo'");
    }
  }
  if (j.contains("instruction")) task.instruction = j.at("instruction").get<std::string>();
  if (j.contains("constraints")) {
    for (const json& c : j.at("constraints")) {
      Constraint constraint;
      if (!c.is_object() || !c.contains("type")) {
        raise(Errc::schema_violation, where + ": constraint needs a 'type'");
      }
      constraint.type = constraint_type_from_string(c.at("type").get<std::string>());
      if (c.contains("molecules")) {
        for (const json& m : c.at("molecules")) {
          constraint.molecules.push_back(m.get<std::string>());
        }
      }
      if (constraint.type == Constraint::Type::user && constraint.molecules.empty()) {
        raise(Errc::schema_violation,
              where + ": user constraint needs a molecules list");
      }
      task.constraints.push_back(std::move(constraint));
    }
  }
  return task;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::parse_error, "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

Task task_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    raise(Errc::parse_error, e.what());
  }
  return task_from_json(j, "task");
}

Task load_task(const std::string& path) { return task_from_json_text(read_file(path)); }

std::vector<Task> load_benchmark(const std::string& path) {
  json root;
  try {
    root = json::parse(read_file(path));
  } catch (const json::exception& e) {
    raise(Errc::parse_error, e.what());
  }
  const json* list = &root;
  if (root.is_object() && root.contains("tasks")) list = &root.at("tasks");
  if (!list->is_array()) {
    raise(Errc::schema_violation, "manifest must be a task array");
  }
  std::vector<Task> tasks;
  int idx = 0;
  for (const json& j : *list) {
    tasks.push_back(task_from_json(j, "tasks[" + std::to_string(idx) + "]"));
    ++idx;
  }
  return tasks;
}

}  // namespace mmorf
