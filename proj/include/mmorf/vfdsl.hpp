#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmorf/chemworld.hpp"

namespace mmorf {

// Value functions combine the eight registered signal components with
// + - * / and decimal literals. The planner maximizes the value; Synth()
// is the negated remaining synthesis cost of the frontier, so the default
// V = Synth() prefers nearly-solved candidates.

enum class Component {
  synth,
  depth,
  bb_price,
  ghs,
  fast_carc,
  max_sim,
  min_sim,
  pyro,
};

const char* component_name(Component c);

struct VfNode;
using VfPtr = std::shared_ptr<const VfNode>;

struct VfNode {
  enum class Kind { literal, call, binary };
  Kind kind = Kind::literal;

  double literal = 0.0;

  Component comp = Component::synth;
  std::vector<std::string> args;

  char op = '+';
  VfPtr lhs, rhs;
};

struct ValueFunctionAst {
  VfPtr root;
};

ValueFunctionAst parse_vf(std::string_view text);
std::string render_vf(const ValueFunctionAst& ast);
bool ast_equal(const ValueFunctionAst& a, const ValueFunctionAst& b);

/// Evaluation view of a partial or complete route.
struct RouteState {
  std::vector<std::string> reactions;  // canonical reaction strings, root first
  std::vector<std::string> frontier;   // open (unsolved, non-purchasable) molecules
  int depth() const { return static_cast<int>(reactions.size()); }
};

double evaluate_vf(const ValueFunctionAst& ast, const RouteState& state,
                   const World& world);

/// Value of each component-call subterm, keyed by its rendered text.
std::vector<std::pair<std::string, double>> evaluate_vf_components(
    const ValueFunctionAst& ast, const RouteState& state, const World& world);

}  // namespace mmorf
