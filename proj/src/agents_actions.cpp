#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "mmorf/agents.hpp"

namespace mmorf {

namespace {

struct ParsedCall {
  std::string name;
  struct Arg {
    bool is_string = false;
    std::string text;   // string payload
    long long number = 0;
  };
  std::vector<Arg> args;
};

void skip_spaces(const std::string& s, std::size_t& pos) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
}

ParsedCall parse_call_text(const std::string& call) {
  ParsedCall out;
  std::size_t pos = 0;
  skip_spaces(call, pos);
  std::size_t start = pos;
  while (pos < call.size() && (std::isalnum(static_cast<unsigned char>(call[pos])) ||
                               call[pos] == '_')) {
    ++pos;
  }
  out.name = call.substr(start, pos - start);
  if (out.name.empty()) raise(Errc::malformed_arguments, "no tool name in '" + call + "'");
  skip_spaces(call, pos);
  if (pos >= call.size() || call[pos] != '(') {
    raise(Errc::malformed_arguments, "expected '(' in '" + call + "'");
  }
  ++pos;
  skip_spaces(call, pos);
  if (pos < call.size() && call[pos] == ')') {
    ++pos;
  } else {
    for (;;) {
      skip_spaces(call, pos);
      if (pos >= call.size()) raise(Errc::malformed_arguments, "unterminated call");
      char c = call[pos];
      ParsedCall::Arg arg;
      if (c == '\'' || c == '"') {
        char quote = c;
        ++pos;
        std::size_t begin = pos;
        while (pos < call.size() && call[pos] != quote) ++pos;
        if (pos >= call.size()) {
          raise(Errc::malformed_arguments, "unterminated string argument");
        }
        arg.is_string = true;
        arg.text = call.substr(begin, pos - begin);
        ++pos;
      } else if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
        std::size_t begin = pos;
        if (c == '-') ++pos;
        while (pos < call.size() && std::isdigit(static_cast<unsigned char>(call[pos]))) {
          ++pos;
        }
        std::string digits = call.substr(begin, pos - begin);
        if (digits == "-" || digits.empty()) {
          raise(Errc::malformed_arguments, "malformed integer argument");
        }
        arg.number = std::stoll(digits);
      } else {
        raise(Errc::malformed_arguments,
              std::string("unexpected character '") + c + "' in arguments");
      }
      out.args.push_back(std::move(arg));
      skip_spaces(call, pos);
      if (pos < call.size() && call[pos] == ',') {
        ++pos;
        continue;
      }
      break;
    }
    skip_spaces(call, pos);
    if (pos >= call.size() || call[pos] != ')') {
      raise(Errc::malformed_arguments, "expected ')' in '" + call + "'");
    }
    ++pos;
  }
  skip_spaces(call, pos);
  if (pos != call.size()) {
    raise(Errc::malformed_arguments, "trailing text after call: '" + call + "'");
  }
  return out;
}

std::vector<std::string> string_args(const ParsedCall& call, std::size_t min_count) {
  std::vector<std::string> out;
  for (const auto& a : call.args) {
    if (!a.is_string || a.text.empty()) {
      raise(Errc::malformed_arguments, call.name + " takes non-empty string arguments");
    }
    out.push_back(a.text);
  }
  if (out.size() < min_count) {
    raise(Errc::malformed_arguments, call.name + " needs at least " +
                                         std::to_string(min_count) + " argument(s)");
  }
  return out;
}

std::string single_string_arg(const ParsedCall& call) {
  if (call.args.size() != 1 || !call.args[0].is_string || call.args[0].text.empty()) {
    raise(Errc::malformed_arguments, call.name + " takes one non-empty string");
  }
  return call.args[0].text;
}

const std::vector<std::string> kKnownTools = {
    "SetValueFunction", "Finalize", "RestrictMolecules", "RestrictSpecificReactions",
    "RestrictReactionTemplates", "DepthLimit", "UnrestrictMolecules",
    "UnrestrictSpecificReaction", "UnrestrictReactionTemplate", "AcceptProposed",
    "Reject", "AcceptPrevious", "Pruning", "ValueFn", "ExpandDefault", "Expand"};

AgentAction action_from_call(const ParsedCall& call) {
  const std::string& n = call.name;
  if (n == "SetValueFunction") return SetValueFunctionAction{single_string_arg(call)};
  if (n == "Finalize") {
    if (!call.args.empty()) raise(Errc::malformed_arguments, "Finalize takes no arguments");
    return FinalizeAction{};
  }
  if (n == "RestrictMolecules") return RestrictMoleculesAction{string_args(call, 1)};
  if (n == "RestrictSpecificReactions") {
    return RestrictSpecificReactionsAction{string_args(call, 1)};
  }
  if (n == "RestrictReactionTemplates") {
    return RestrictReactionTemplatesAction{string_args(call, 1)};
  }
  if (n == "DepthLimit") {
    if (call.args.size() != 1 || call.args[0].is_string) {
      raise(Errc::malformed_arguments, "DepthLimit takes one integer");
    }
    return DepthLimitAction{static_cast<int>(call.args[0].number)};
  }
  if (n == "UnrestrictMolecules") return UnrestrictMoleculesAction{string_args(call, 1)};
  if (n == "UnrestrictSpecificReaction") {
    return UnrestrictSpecificReactionAction{single_string_arg(call)};
  }
  if (n == "UnrestrictReactionTemplate") {
    return UnrestrictReactionTemplateAction{single_string_arg(call)};
  }
  if (n == "AcceptProposed") return AcceptProposedAction{single_string_arg(call)};
  if (n == "Reject") return RejectAction{single_string_arg(call)};
  if (n == "AcceptPrevious") {
    if (call.args.size() != 2 || call.args[0].is_string || !call.args[1].is_string ||
        call.args[1].text.empty()) {
      raise(Errc::malformed_arguments, "AcceptPrevious takes (id, \"reason\")");
    }
    return AcceptPreviousAction{static_cast<int>(call.args[0].number),
                                call.args[1].text};
  }
  if (n == "Pruning") return PruningAction{single_string_arg(call)};
  if (n == "ValueFn") return ValueFnAction{single_string_arg(call)};
  if (n == "ExpandDefault") {
    if (call.args.size() != 1 || call.args[0].is_string || call.args[0].number < 1) {
      raise(Errc::malformed_arguments, "ExpandDefault takes one integer >= 1");
    }
    return ExpandDefaultAction{static_cast<int>(call.args[0].number)};
  }
  if (n == "Expand") return ExpandAction{single_string_arg(call)};
  raise(Errc::unknown_tool, "'" + n + "' is not a known tool");
}

}  // namespace

std::string action_name(const AgentAction& action) {
  return std::visit(
      [](const auto& a) -> std::string {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, SetValueFunctionAction>) return "SetValueFunction";
        else if constexpr (std::is_same_v<T, FinalizeAction>) return "Finalize";
        else if constexpr (std::is_same_v<T, RestrictMoleculesAction>) return "RestrictMolecules";
        else if constexpr (std::is_same_v<T, RestrictSpecificReactionsAction>) return "RestrictSpecificReactions";
        else if constexpr (std::is_same_v<T, RestrictReactionTemplatesAction>) return "RestrictReactionTemplates";
        else if constexpr (std::is_same_v<T, DepthLimitAction>) return "DepthLimit";
        else if constexpr (std::is_same_v<T, UnrestrictMoleculesAction>) return "UnrestrictMolecules";
        else if constexpr (std::is_same_v<T, UnrestrictSpecificReactionAction>) return "UnrestrictSpecificReaction";
        else if constexpr (std::is_same_v<T, UnrestrictReactionTemplateAction>) return "UnrestrictReactionTemplate";
        else if constexpr (std::is_same_v<T, AcceptProposedAction>) return "AcceptProposed";
        else if constexpr (std::is_same_v<T, RejectAction>) return "Reject";
        else if constexpr (std::is_same_v<T, AcceptPreviousAction>) return "AcceptPrevious";
        else if constexpr (std::is_same_v<T, PruningAction>) return "Pruning";
        else if constexpr (std::is_same_v<T, ValueFnAction>) return "ValueFn";
        else if constexpr (std::is_same_v<T, ExpandDefaultAction>) return "ExpandDefault";
        else return "Expand";
      },
      action);
}

namespace {

std::string quoted_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += "'" + items[i] + "'";
  }
  return out;
}

}  // namespace

std::string render_action(const AgentAction& action) {
  return std::visit(
      [](const auto& a) -> std::string {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, SetValueFunctionAction>) {
          return "SetValueFunction(\"" + a.text + "\")";
        } else if constexpr (std::is_same_v<T, FinalizeAction>) {
          return "Finalize()";
        } else if constexpr (std::is_same_v<T, RestrictMoleculesAction>) {
          return "RestrictMolecules(" + quoted_list(a.molecules) + ")";
        } else if constexpr (std::is_same_v<T, RestrictSpecificReactionsAction>) {
          return "RestrictSpecificReactions(" + quoted_list(a.reactions) + ")";
        } else if constexpr (std::is_same_v<T, RestrictReactionTemplatesAction>) {
          return "RestrictReactionTemplates(" + quoted_list(a.patterns) + ")";
        } else if constexpr (std::is_same_v<T, DepthLimitAction>) {
          return "DepthLimit(" + std::to_string(a.depth) + ")";
        } else if constexpr (std::is_same_v<T, UnrestrictMoleculesAction>) {
          return "UnrestrictMolecules(" + quoted_list(a.molecules) + ")";
        } else if constexpr (std::is_same_v<T, UnrestrictSpecificReactionAction>) {
          return "UnrestrictSpecificReaction('" + a.reaction + "')";
        } else if constexpr (std::is_same_v<T, UnrestrictReactionTemplateAction>) {
          return "UnrestrictReactionTemplate('" + a.pattern + "')";
        } else if constexpr (std::is_same_v<T, AcceptProposedAction>) {
          return "AcceptProposed(\"" + a.reason + "\")";
        } else if constexpr (std::is_same_v<T, RejectAction>) {
          return "Reject(\"" + a.feedback + "\")";
        } else if constexpr (std::is_same_v<T, AcceptPreviousAction>) {
          return "AcceptPrevious(" + std::to_string(a.id) + ", \"" + a.reason + "\")";
        } else if constexpr (std::is_same_v<T, PruningAction>) {
          return "Pruning(\"" + a.instructions + "\")";
        } else if constexpr (std::is_same_v<T, ValueFnAction>) {
          return "ValueFn(\"" + a.instructions + "\")";
        } else if constexpr (std::is_same_v<T, ExpandDefaultAction>) {
          return "ExpandDefault(" + std::to_string(a.n) + ")";
        } else {
          return "Expand(\"" + a.id + "\")";
        }
      },
      action);
}

const std::vector<std::string>& allowed_actions_for(Role role) {
  static const std::vector<std::string> navigator = {"SetValueFunction", "Finalize"};
  static const std::vector<std::string> regulator = {
      "RestrictMolecules", "RestrictSpecificReactions", "RestrictReactionTemplates",
      "DepthLimit", "UnrestrictMolecules", "UnrestrictSpecificReaction",
      "UnrestrictReactionTemplate", "Finalize"};
  static const std::vector<std::string> verifier = {"AcceptProposed", "Reject",
                                                    "AcceptPrevious"};
  static const std::vector<std::string> coordinator = {"Pruning", "ValueFn",
                                                       "ExpandDefault", "Expand"};
  switch (role) {
    case Role::navigator: return navigator;
    case Role::regulator: return regulator;
    case Role::verifier: return verifier;
    case Role::coordinator: return coordinator;
  }
  return navigator;
}

AgentAction parse_action(std::string_view text,
                         const std::vector<std::string>& allowed) {
  std::size_t marker = text.rfind("Action:");
  if (marker == std::string_view::npos) {
    raise(Errc::no_action_found, "no 'Action:' line in reply");
  }
  std::string_view rest = text.substr(marker + 7);

  std::string call;
  std::size_t tick = rest.find('`');
  if (tick != std::string_view::npos) {
    std::size_t close = rest.find('`', tick + 1);
    if (close == std::string_view::npos) {
      raise(Errc::malformed_arguments, "unterminated backtick-wrapped call");
    }
    call = std::string(rest.substr(tick + 1, close - tick - 1));
  } else {
    std::size_t eol = rest.find('\n');
    call = std::string(eol == std::string_view::npos ? rest : rest.substr(0, eol));
  }
  // drop a trailing <PAUSE> sentinel if present
  std::size_t pause = call.find("<PAUSE>");
  if (pause != std::string::npos) call.erase(pause);
  while (!call.empty() && std::isspace(static_cast<unsigned char>(call.back()))) {
    call.pop_back();
  }
  if (call.empty()) raise(Errc::no_action_found, "empty action call");

  ParsedCall parsed = parse_call_text(call);
  if (std::find(kKnownTools.begin(), kKnownTools.end(), parsed.name) ==
      kKnownTools.end()) {
    raise(Errc::unknown_tool, "'" + parsed.name + "' is not a known tool");
  }
  if (std::find(allowed.begin(), allowed.end(), parsed.name) == allowed.end()) {
    raise(Errc::disallowed_tool, "'" + parsed.name + "' is not allowed here");
  }
  return action_from_call(parsed);
}

}  // namespace mmorf
