#include <cctype>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mmorf/agents.hpp"
#include "mmorf/error.hpp"

namespace mmorf {

namespace detail {
const std::map<std::string, std::string>& prompt_assets();
}

const char* role_name(Role role) {
  switch (role) {
    case Role::coordinator: return "coordinator";
    case Role::navigator: return "navigator";
    case Role::regulator: return "regulator";
    case Role::verifier: return "verifier";
  }
  return "?";
}

namespace {

// ---------------------------------------------------------------------------
// Tiny template language: {NAME}, {NAME+1}, {NAME-3}, {IF NAME>0} ... {ELIF
// NAME=2} ... {ELSE} ... {/IF}, {FOREACH LIST} ... {/FOREACH}. A newline
// directly after a control tag belongs to the tag. Braces that do not match
// the tag syntax are literal text.
// ---------------------------------------------------------------------------

struct Node;
using NodeList = std::vector<Node>;

struct Condition {
  std::string name;
  char op = '=';
  long long value = 0;
};

struct Node {
  enum class Kind { text, placeholder, branch, foreach_ } kind = Kind::text;
  std::string text;          // text
  std::string name;          // placeholder / foreach list
  long long delta = 0;       // placeholder arithmetic
  std::vector<std::pair<Condition, NodeList>> branches;  // branch
  NodeList else_body;        // branch
  bool has_else = false;
  NodeList body;             // foreach
};

bool is_name_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

struct TagInfo {
  enum class Type { none, placeholder, if_, elif_, else_, endif_, foreach_, endforeach_ };
  Type type = Type::none;
  std::string name;
  long long delta = 0;
  Condition cond;
  std::size_t end = 0;  // position just past '}'
};

bool parse_condition(const std::string& body, Condition* out) {
  std::size_t i = 0;
  while (i < body.size() && is_name_char(body[i])) ++i;
  if (i == 0 || i >= body.size()) return false;
  char op = body[i];
  if (op != '=' && op != '<' && op != '>') return false;
  std::string name = body.substr(0, i);
  std::string num = body.substr(i + 1);
  if (num.empty()) return false;
  std::size_t j = 0;
  if (num[0] == '-') j = 1;
  for (; j < num.size(); ++j) {
    if (!std::isdigit(static_cast<unsigned char>(num[j]))) return false;
  }
  out->name = name;
  out->op = op;
  out->value = std::stoll(num);
  return true;
}

TagInfo scan_tag(const std::string& text, std::size_t brace) {
  TagInfo info;
  std::size_t close = text.find('}', brace);
  if (close == std::string::npos) return info;
  std::string body = text.substr(brace + 1, close - brace - 1);
  info.end = close + 1;

  auto strip = [](const std::string& s) {
    std::size_t b = s.find_first_not_of(' ');
    std::size_t e = s.find_last_not_of(' ');
    if (b == std::string::npos) return std::string();
    return s.substr(b, e - b + 1);
  };

  if (body.rfind("IF ", 0) == 0) {
    if (parse_condition(strip(body.substr(3)), &info.cond)) info.type = TagInfo::Type::if_;
    return info;
  }
  if (body.rfind("ELIF ", 0) == 0) {
    if (parse_condition(strip(body.substr(5)), &info.cond)) info.type = TagInfo::Type::elif_;
    return info;
  }
  if (body == "ELSE") {
    info.type = TagInfo::Type::else_;
    return info;
  }
  if (body == "/IF") {
    info.type = TagInfo::Type::endif_;
    return info;
  }
  if (body.rfind("FOREACH ", 0) == 0) {
    std::string name = strip(body.substr(8));
    for (char c : name) {
      if (!is_name_char(c)) return info;
    }
    info.type = TagInfo::Type::foreach_;
    info.name = name;
    return info;
  }
  if (body == "/FOREACH") {
    info.type = TagInfo::Type::endforeach_;
    return info;
  }

  // placeholder: NAME or NAME+k or NAME-k
  std::size_t i = 0;
  while (i < body.size() && is_name_char(body[i])) ++i;
  if (i == 0) return info;
  std::string name = body.substr(0, i);
  long long delta = 0;
  if (i < body.size()) {
    char sign = body[i];
    if (sign != '+' && sign != '-') return info;
    std::string num = body.substr(i + 1);
    if (num.empty()) return info;
    for (char c : num) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return info;
    }
    delta = std::stoll(num);
    if (sign == '-') delta = -delta;
  }
  info.type = TagInfo::Type::placeholder;
  info.name = name;
  info.delta = delta;
  return info;
}

struct TemplateParser {
  const std::string& text;
  std::size_t pos = 0;

  NodeList parse_block(TagInfo::Type* terminator, Condition* elif_cond) {
    NodeList out;
    std::string literal;
    auto flush = [&]() {
      if (!literal.empty()) {
        Node n;
        n.kind = Node::Kind::text;
        n.text = std::move(literal);
        literal.clear();
        out.push_back(std::move(n));
      }
    };

    while (pos < text.size()) {
      if (text[pos] != '{') {
        literal.push_back(text[pos]);
        ++pos;
        continue;
      }
      TagInfo tag = scan_tag(text, pos);
      if (tag.type == TagInfo::Type::none) {
        literal.push_back(text[pos]);
        ++pos;
        continue;
      }
      auto consume_tag = [&]() {
        pos = tag.end;
        if (tag.type != TagInfo::Type::placeholder && pos < text.size() &&
            text[pos] == '\n') {
          ++pos;
        }
      };

      switch (tag.type) {
        case TagInfo::Type::placeholder: {
          flush();
          Node n;
          n.kind = Node::Kind::placeholder;
          n.name = tag.name;
          n.delta = tag.delta;
          out.push_back(std::move(n));
          consume_tag();
          break;
        }
        case TagInfo::Type::if_: {
          flush();
          consume_tag();
          Node n;
          n.kind = Node::Kind::branch;
          Condition cond = tag.cond;
          for (;;) {
            TagInfo::Type term = TagInfo::Type::none;
            Condition next_cond;
            NodeList body = parse_block(&term, &next_cond);
            if (term == TagInfo::Type::elif_) {
              n.branches.emplace_back(cond, std::move(body));
              cond = next_cond;
              continue;
            }
            if (term == TagInfo::Type::else_) {
              n.branches.emplace_back(cond, std::move(body));
              TagInfo::Type term2 = TagInfo::Type::none;
              Condition ignored;
              n.else_body = parse_block(&term2, &ignored);
              n.has_else = true;
              if (term2 != TagInfo::Type::endif_) {
                raise(Errc::parse_error, "unterminated {ELSE} block");
              }
              break;
            }
            if (term == TagInfo::Type::endif_) {
              n.branches.emplace_back(cond, std::move(body));
              break;
            }
            raise(Errc::parse_error, "unterminated {IF} block");
          }
          out.push_back(std::move(n));
          break;
        }
        case TagInfo::Type::foreach_: {
          flush();
          consume_tag();
          Node n;
          n.kind = Node::Kind::foreach_;
          n.name = tag.name;
          TagInfo::Type term = TagInfo::Type::none;
          Condition ignored;
          n.body = parse_block(&term, &ignored);
          if (term != TagInfo::Type::endforeach_) {
            raise(Errc::parse_error, "unterminated {FOREACH} block");
          }
          out.push_back(std::move(n));
          break;
        }
        case TagInfo::Type::elif_:
        case TagInfo::Type::else_:
        case TagInfo::Type::endif_:
        case TagInfo::Type::endforeach_: {
          flush();
          consume_tag();
          if (terminator) {
            *terminator = tag.type;
            if (tag.type == TagInfo::Type::elif_ && elif_cond) *elif_cond = tag.cond;
          }
          return out;
        }
        case TagInfo::Type::none:
          break;
      }
    }
    flush();
    if (terminator) *terminator = TagInfo::Type::none;
    return out;
  }
};

struct RenderScope {
  const TemplateContext& ctx;
  const std::map<std::string, std::string>* item = nullptr;

  std::string lookup_string(const std::string& name) const {
    if (item) {
      auto it = item->find(name);
      if (it != item->end()) return it->second;
    }
    auto s = ctx.scalars.find(name);
    if (s != ctx.scalars.end()) return s->second;
    auto n = ctx.numbers.find(name);
    if (n != ctx.numbers.end()) return std::to_string(n->second);
    raise(Errc::missing_placeholder, name);
  }

  long long lookup_number(const std::string& name) const {
    if (item) {
      auto it = item->find(name);
      if (it != item->end()) {
        try {
          return std::stoll(it->second);
        } catch (...) {
          raise(Errc::missing_placeholder, name + " is not numeric");
        }
      }
    }
    auto n = ctx.numbers.find(name);
    if (n != ctx.numbers.end()) return n->second;
    auto s = ctx.scalars.find(name);
    if (s != ctx.scalars.end()) {
      try {
        return std::stoll(s->second);
      } catch (...) {
        raise(Errc::missing_placeholder, name + " is not numeric");
      }
    }
    raise(Errc::missing_placeholder, name);
  }
};

void render_nodes(const NodeList& nodes, const RenderScope& scope, std::string& out);

void render_node(const Node& node, const RenderScope& scope, std::string& out) {
  switch (node.kind) {
    case Node::Kind::text:
      out += node.text;
      return;
    case Node::Kind::placeholder: {
      if (node.delta != 0) {
        out += std::to_string(scope.lookup_number(node.name) + node.delta);
      } else {
        out += scope.lookup_string(node.name);
      }
      return;
    }
    case Node::Kind::branch: {
      for (const auto& [cond, body] : node.branches) {
        long long v = scope.lookup_number(cond.name);
        bool hit = cond.op == '=' ? v == cond.value
                   : cond.op == '<' ? v < cond.value
                                    : v > cond.value;
        if (hit) {
          render_nodes(body, scope, out);
          return;
        }
      }
      if (node.has_else) render_nodes(node.else_body, scope, out);
      return;
    }
    case Node::Kind::foreach_: {
      auto it = scope.ctx.lists.find(node.name);
      if (it == scope.ctx.lists.end()) raise(Errc::missing_placeholder, node.name);
      for (const auto& item : it->second) {
        RenderScope inner{scope.ctx, &item};
        render_nodes(node.body, inner, out);
      }
      return;
    }
  }
}

void render_nodes(const NodeList& nodes, const RenderScope& scope, std::string& out) {
  for (const Node& n : nodes) render_node(n, scope, out);
}

}  // namespace

std::string render_prompt(const std::string& template_id, const TemplateContext& ctx) {
  const auto& assets = detail::prompt_assets();
  auto it = assets.find(template_id);
  if (it == assets.end()) {
    raise(Errc::unknown_template, "no template '" + template_id + "'");
  }
  TemplateParser parser{it->second};
  NodeList nodes = parser.parse_block(nullptr, nullptr);
  std::string out;
  RenderScope scope{ctx, nullptr};
  render_nodes(nodes, scope, out);
  return out;
}

}  // namespace mmorf
