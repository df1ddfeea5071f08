#include "mmorf/vfdsl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <regex>
#include <set>

namespace mmorf {

const char* component_name(Component c) {
  switch (c) {
    case Component::synth: return "Synth";
    case Component::depth: return "Depth";
    case Component::bb_price: return "BBPrice";
    case Component::ghs: return "GHS";
    case Component::fast_carc: return "FastCarc";
    case Component::max_sim: return "MaxSim";
    case Component::min_sim: return "MinSim";
    case Component::pyro: return "Pyro";
  }
  return "?";
}

namespace {

const std::map<std::string, Component>& component_registry() {
  static const std::map<std::string, Component> reg = {
      {"Synth", Component::synth},   {"Depth", Component::depth},
      {"BBPrice", Component::bb_price}, {"GHS", Component::ghs},
      {"FastCarc", Component::fast_carc}, {"MaxSim", Component::max_sim},
      {"MinSim", Component::min_sim}, {"Pyro", Component::pyro}};
  return reg;
}

const std::regex kGhsArg("H[0-9]{3}");

void validate_call_args(Component comp, const std::vector<std::string>& args) {
  switch (comp) {
    case Component::synth:
    case Component::depth:
    case Component::bb_price:
    case Component::fast_carc:
    case Component::pyro:
      if (!args.empty()) {
        raise(Errc::bad_argument,
              std::string(component_name(comp)) + "() takes no arguments");
      }
      break;
    case Component::ghs:
      if (args.empty()) raise(Errc::bad_argument, "GHS needs at least one code");
      for (const std::string& a : args) {
        if (!std::regex_match(a, kGhsArg)) {
          raise(Errc::bad_argument, "'" + a + "' is not a GHS H-code");
        }
      }
      break;
    case Component::max_sim:
    case Component::min_sim:
      if (args.empty()) {
        raise(Errc::bad_argument,
              std::string(component_name(comp)) + " needs at least one molecule");
      }
      for (const std::string& a : args) {
        if (!is_canonical_molecule(a)) {
          raise(Errc::bad_argument, "'" + a + "' is not a canonical molecule");
        }
      }
      break;
  }
}

struct Parser {
  std::string_view text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }

  char peek_raw(std::size_t ahead) const {
    return pos + ahead < text.size() ? text[pos + ahead] : '\0';
  }

  [[noreturn]] void fail(const std::string& what) {
    raise(Errc::syntax_error, what + " at offset " + std::to_string(pos));
  }

  void check_forbidden() {
    skip_ws();
    if (pos >= text.size()) return;
    char c = text[pos];
    if (c == '*' && peek_raw(1) == '*') {
      raise(Errc::forbidden_operator, "'**' is not allowed");
    }
    if (c == '^') raise(Errc::forbidden_operator, "'^' is not allowed");
    if (c == '<' || c == '>' || c == '=' || c == '!' || c == '%') {
      raise(Errc::forbidden_operator, std::string("'") + c + "' is not allowed");
    }
  }

  VfPtr parse_expression() {
    VfPtr node = parse_term();
    for (;;) {
      check_forbidden();
      char c = peek();
      if (c != '+' && c != '-') break;
      ++pos;
      VfPtr rhs = parse_term();
      auto bin = std::make_shared<VfNode>();
      bin->kind = VfNode::Kind::binary;
      bin->op = c;
      bin->lhs = node;
      bin->rhs = rhs;
      node = bin;
    }
    return node;
  }

  VfPtr parse_term() {
    VfPtr node = parse_atom();
    for (;;) {
      check_forbidden();
      char c = peek();
      if (c != '*' && c != '/') break;
      ++pos;
      VfPtr rhs = parse_atom();
      auto bin = std::make_shared<VfNode>();
      bin->kind = VfNode::Kind::binary;
      bin->op = c;
      bin->lhs = node;
      bin->rhs = rhs;
      node = bin;
    }
    return node;
  }

  VfPtr parse_atom() {
    check_forbidden();
    char c = peek();
    if (c == '(') {
      ++pos;
      VfPtr inner = parse_expression();
      if (peek() != ')') fail("expected ')'");
      ++pos;
      return inner;
    }
    if (c == '+' || c == '-') {
      // Sign is only valid immediately before a numeric literal.
      std::size_t save = pos;
      ++pos;
      char n = peek();
      if (!(std::isdigit(static_cast<unsigned char>(n)) || n == '.')) {
        pos = save;
        fail("unary sign must precede a numeric literal");
      }
      VfPtr lit = parse_number();
      if (c == '-') {
        auto neg = std::make_shared<VfNode>(*lit);
        neg->literal = -neg->literal;
        return neg;
      }
      return lit;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return parse_number();
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      return parse_call();
    }
    if (c == '\0') fail("unexpected end of input");
    fail(std::string("unexpected character '") + c + "'");
  }

  VfPtr parse_number() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() &&
           (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.')) {
      ++pos;
    }
    std::string digits(text.substr(start, pos - start));
    if (digits.empty() || digits == ".") fail("expected a number");
    if (std::count(digits.begin(), digits.end(), '.') > 1) fail("malformed number");
    char* end = nullptr;
    double value = std::strtod(digits.c_str(), &end);
    if (end != digits.c_str() + digits.size()) fail("malformed number");
    auto node = std::make_shared<VfNode>();
    node->kind = VfNode::Kind::literal;
    node->literal = value;
    return node;
  }

  VfPtr parse_call() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() &&
           std::isalnum(static_cast<unsigned char>(text[pos]))) {
      ++pos;
    }
    std::string name(text.substr(start, pos - start));
    if (peek() != '(') fail("expected '(' after '" + name + "'");
    auto it = component_registry().find(name);
    if (it == component_registry().end()) {
      raise(Errc::unknown_component, "'" + name + "' is not a registered component");
    }
    ++pos;  // '('
    std::vector<std::string> args;
    if (peek() != ')') {
      for (;;) {
        args.push_back(parse_string_arg());
        char c = peek();
        if (c == ',') {
          ++pos;
          continue;
        }
        break;
      }
    }
    if (peek() != ')') fail("expected ')'");
    ++pos;
    validate_call_args(it->second, args);
    auto node = std::make_shared<VfNode>();
    node->kind = VfNode::Kind::call;
    node->comp = it->second;
    node->args = std::move(args);
    return node;
  }

  std::string parse_string_arg() {
    if (peek() != '\'') fail("expected a single-quoted argument");
    ++pos;
    std::string out;
    while (pos < text.size() && text[pos] != '\'') {
      out.push_back(text[pos]);
      ++pos;
    }
    if (pos >= text.size()) fail("unterminated string argument");
    ++pos;
    return out;
  }
};

}  // namespace

ValueFunctionAst parse_vf(std::string_view text) {
  Parser p{text};
  VfPtr root = p.parse_expression();
  p.check_forbidden();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing input");
  return ValueFunctionAst{root};
}

namespace {

// Shortest fixed-notation literal that round-trips; the grammar has no
// exponent form.
std::string render_literal(double value) {
  for (int precision = 0; precision <= 17; ++precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
    if (std::strtod(buf, nullptr) == value) {
      std::string s(buf);
      if (s.find('.') != std::string::npos) {
        while (s.size() > 1 && s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
      }
      return s;
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17f", value);
  return buf;
}

int precedence_of(const VfNode& node) {
  if (node.kind != VfNode::Kind::binary) return 3;
  return (node.op == '*' || node.op == '/') ? 2 : 1;
}

void render_node(const VfNode& node, std::string& out) {
  switch (node.kind) {
    case VfNode::Kind::literal:
      out += render_literal(node.literal);
      return;
    case VfNode::Kind::call: {
      out += component_name(node.comp);
      out += '(';
      for (std::size_t i = 0; i < node.args.size(); ++i) {
        if (i) out += ", ";
        out += '\'';
        out += node.args[i];
        out += '\'';
      }
      out += ')';
      return;
    }
    case VfNode::Kind::binary: {
      int prec = precedence_of(node);
      bool paren_l = precedence_of(*node.lhs) < prec;
      // Right side also needs parens at equal precedence (left-assoc tree).
      bool paren_r = precedence_of(*node.rhs) <= prec &&
                     node.rhs->kind == VfNode::Kind::binary;
      if (paren_l) out += '(';
      render_node(*node.lhs, out);
      if (paren_l) out += ')';
      out += ' ';
      out += node.op;
      out += ' ';
      if (paren_r) out += '(';
      render_node(*node.rhs, out);
      if (paren_r) out += ')';
      return;
    }
  }
}

}  // namespace

std::string render_vf(const ValueFunctionAst& ast) {
  std::string out;
  render_node(*ast.root, out);
  return out;
}

namespace {

bool node_equal(const VfNode& a, const VfNode& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case VfNode::Kind::literal:
      return a.literal == b.literal;
    case VfNode::Kind::call:
      return a.comp == b.comp && a.args == b.args;
    case VfNode::Kind::binary:
      return a.op == b.op && node_equal(*a.lhs, *b.lhs) && node_equal(*a.rhs, *b.rhs);
  }
  return false;
}

struct EvalContext {
  const RouteState& state;
  const World& world;
  std::vector<Reaction> reactions;
  std::map<std::string, MoleculeProfile> profiles;

  explicit EvalContext(const RouteState& s, const World& w) : state(s), world(w) {
    for (const std::string& r : s.reactions) {
      reactions.push_back(parse_reaction(r));
    }
    for (const Reaction& r : reactions) {
      for (const std::string& m : reaction_molecules(r)) {
        if (!profiles.count(m)) profiles[m] = annotate(w, m);
      }
    }
  }

  const MoleculeProfile& profile(const std::string& m) {
    auto it = profiles.find(m);
    if (it == profiles.end()) {
      it = profiles.emplace(m, annotate(world, m)).first;
    }
    return it->second;
  }

  double component_value(const VfNode& call) {
    switch (call.comp) {
      case Component::synth: {
        double cost = 0.0;
        std::set<std::string> seen;
        for (const std::string& m : state.frontier) {
          if (!seen.insert(m).second) continue;
          cost += profile(m).synth_cost;
        }
        return -cost;
      }
      case Component::depth:
        return static_cast<double>(state.depth());
      case Component::bb_price: {
        double total = 0.0;
        for (const Reaction& r : reactions) {
          for (const std::string& m : r.reactants) {
            const MoleculeProfile& p = profile(m);
            if (p.purchasable && p.price) total += *p.price;
          }
        }
        return total;
      }
      case Component::ghs: {
        double total = 0.0;
        for (const Reaction& r : reactions) {
          bool hit = false;
          for (const std::string& m : reaction_molecules(r)) {
            const MoleculeProfile& p = profile(m);
            for (const std::string& code : call.args) {
              if (p.ghs.count(code)) {
                hit = true;
                break;
              }
            }
            if (hit) break;
          }
          total += hit ? 1.0 : 0.0;
        }
        return total;
      }
      case Component::fast_carc: {
        double total = 0.0;
        for (const Reaction& r : reactions) {
          bool hit = false;
          for (const std::string& m : reaction_molecules(r)) {
            if (profile(m).carc_alert) {
              hit = true;
              break;
            }
          }
          total += hit ? 1.0 : 0.0;
        }
        return total;
      }
      case Component::pyro: {
        double total = 0.0;
        for (const Reaction& r : reactions) {
          bool hit = false;
          for (const std::string& m : reaction_molecules(r)) {
            if (profile(m).predicted_pyrophoric) {
              hit = true;
              break;
            }
          }
          total += hit ? 1.0 : 0.0;
        }
        return total;
      }
      case Component::max_sim:
      case Component::min_sim: {
        std::vector<Bitvec> refs;
        refs.reserve(call.args.size());
        for (const std::string& a : call.args) refs.push_back(fingerprint(a));
        double total = 0.0;
        for (const Reaction& r : reactions) {
          bool first = true;
          double acc = 0.0;
          for (const std::string& m : reaction_molecules(r)) {
            Bitvec fp = fingerprint(m);
            double best = 0.0;
            for (const Bitvec& ref : refs) best = std::max(best, tanimoto(fp, ref));
            if (first) {
              acc = best;
              first = false;
            } else if (call.comp == Component::max_sim) {
              acc = std::max(acc, best);
            } else {
              acc = std::min(acc, best);
            }
          }
          total += first ? 0.0 : acc;
        }
        return total;
      }
      default:
        return 0.0;
    }
  }

  double eval(const VfNode& node) {
    switch (node.kind) {
      case VfNode::Kind::literal:
        return node.literal;
      case VfNode::Kind::call:
        return component_value(node);
      case VfNode::Kind::binary: {
        double l = eval(*node.lhs);
        double r = eval(*node.rhs);
        switch (node.op) {
          case '+': return l + r;
          case '-': return l - r;
          case '*': return l * r;
          case '/':
            if (std::fabs(r) < 1e-9) {
              raise(Errc::division_by_zero, "denominator " + std::to_string(r));
            }
            return l / r;
        }
        return 0.0;
      }
    }
    return 0.0;
  }
};

void collect_calls(const VfNode& node, std::vector<const VfNode*>& out) {
  switch (node.kind) {
    case VfNode::Kind::literal:
      return;
    case VfNode::Kind::call:
      out.push_back(&node);
      return;
    case VfNode::Kind::binary:
      collect_calls(*node.lhs, out);
      collect_calls(*node.rhs, out);
      return;
  }
}

}  // namespace

bool ast_equal(const ValueFunctionAst& a, const ValueFunctionAst& b) {
  return node_equal(*a.root, *b.root);
}

double evaluate_vf(const ValueFunctionAst& ast, const RouteState& state,
                   const World& world) {
  EvalContext ctx(state, world);
  return ctx.eval(*ast.root);
}

std::vector<std::pair<std::string, double>> evaluate_vf_components(
    const ValueFunctionAst& ast, const RouteState& state, const World& world) {
  EvalContext ctx(state, world);
  std::vector<const VfNode*> calls;
  collect_calls(*ast.root, calls);
  std::vector<std::pair<std::string, double>> out;
  for (const VfNode* call : calls) {
    std::string text;
    render_node(*call, text);
    out.emplace_back(text, ctx.component_value(*call));
  }
  return out;
}

}  // namespace mmorf
