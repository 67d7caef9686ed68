#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace gps {

struct TaskSpec;

// Prompt template dialect:
//   literal text
//   {{ name }}                                  variable (inner spaces allowed)
//   {% if name == "lit" %} .. {% else %} .. {% endif %}   flat conditional
// Anything else inside {% %} is rejected, as are nested conditionals.

class TemplateError : public std::runtime_error {
 public:
  enum class Kind {
    UnbalancedTag,
    UnknownTag,
    BadCondition,
    BadVariable,
    NestedConditional,
    MalformedSentinel,
    MissingBinding,
    SentinelMissing,
    SentinelDuplicated,
  };

  TemplateError(Kind kind, std::string detail);

  Kind kind() const { return kind_; }
  /// Offending name, tag or sentinel.
  const std::string& detail() const { return detail_; }

 private:
  Kind kind_;
  std::string detail_;
};

const char* to_string(TemplateError::Kind kind);

struct LiteralNode {
  std::string text;
  bool operator==(const LiteralNode&) const = default;
};

struct VariableNode {
  std::string name;
  std::string raw;  // source text including braces and inner spacing
  bool operator==(const VariableNode&) const = default;
};

using FlatNode = std::variant<LiteralNode, VariableNode>;

struct ConditionalNode {
  std::string var;
  std::string literal;
  std::vector<FlatNode> then_branch;
  std::vector<FlatNode> else_branch;
  std::string open_raw;
  std::optional<std::string> else_raw;
  std::string endif_raw;

  std::string serialize() const;
  bool operator==(const ConditionalNode&) const = default;
};

using Node = std::variant<LiteralNode, VariableNode, ConditionalNode>;

class Template {
 public:
  Template() = default;

  static Template parse(std::string_view raw);

  const std::string& raw() const { return raw_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::set<std::string>& placeholders() const { return placeholders_; }

  /// Rebuilds source text from the AST; equals raw() for every parsed input.
  std::string serialize() const;

  /// FNV-1a of the raw text, hex encoded.
  std::string id() const;

  /// raw() with whitespace trimmed and collapsed; the dedup key.
  std::string normalized() const;

  bool operator==(const Template& other) const { return raw_ == other.raw_; }

 private:
  std::string raw_;
  std::vector<Node> nodes_;
  std::set<std::string> placeholders_;
};

std::string render(const Template& t,
                   const std::map<std::string, std::string>& bindings);

std::set<std::string> extract_placeholders(const Template& t);

/// Ordered sentinel -> original fragment.
using ProtectionMap = std::vector<std::pair<std::string, std::string>>;

struct ProtectedText {
  std::string text;
  ProtectionMap map;
};

/// Replaces every variable and every whole conditional block with a sentinel
/// so that text rewriters can only touch literal prose.
ProtectedText protect(const Template& t);

/// Inverse of protect. Each sentinel in the map must occur exactly once.
Template restore(std::string_view text, const ProtectionMap& map);

bool validate_for_task(const Template& t, const TaskSpec& schema);

}  // namespace gps
