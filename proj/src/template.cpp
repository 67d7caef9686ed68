#include "gps/template.hpp"

#include <regex>

#include "gps/task_data.hpp"
#include "gps/text.hpp"

namespace gps {

TemplateError::TemplateError(Kind kind, std::string detail)
    : std::runtime_error(std::string(to_string(kind)) +
                         (detail.empty() ? "" : ": " + detail)),
      kind_(kind),
      detail_(std::move(detail)) {}

const char* to_string(TemplateError::Kind kind) {
  using K = TemplateError::Kind;
  switch (kind) {
    case K::UnbalancedTag: return "UnbalancedTag";
    case K::UnknownTag: return "UnknownTag";
    case K::BadCondition: return "BadCondition";
    case K::BadVariable: return "BadVariable";
    case K::NestedConditional: return "NestedConditional";
    case K::MalformedSentinel: return "MalformedSentinel";
    case K::MissingBinding: return "MissingBinding";
    case K::SentinelMissing: return "SentinelMissing";
    case K::SentinelDuplicated: return "SentinelDuplicated";
  }
  return "TemplateError";
}

namespace {

std::string serialize_flat(const std::vector<FlatNode>& nodes) {
  std::string out;
  for (const auto& n : nodes) {
    if (const auto* lit = std::get_if<LiteralNode>(&n)) {
      out += lit->text;
    } else {
      out += std::get<VariableNode>(n).raw;
    }
  }
  return out;
}

const std::regex& condition_pattern() {
  static const std::regex re(
      R"re(^if\s+([A-Za-z_][A-Za-z0-9_]*)\s*==\s*"([^"]*)"$)re");
  return re;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  std::vector<Node> run(std::set<std::string>& placeholders) {
    std::size_t pos = 0;
    while (pos < src_.size()) {
      const std::size_t var_at = src_.find("{{", pos);
      const std::size_t tag_at = src_.find("{%", pos);
      const std::size_t next = std::min(var_at, tag_at);
      if (next == std::string_view::npos) {
        add_literal(src_.substr(pos));
        break;
      }
      if (next > pos) add_literal(src_.substr(pos, next - pos));
      if (next == var_at) {
        pos = parse_variable(next, placeholders);
      } else {
        pos = parse_tag(next, placeholders);
      }
    }
    if (open_) {
      throw TemplateError(TemplateError::Kind::UnbalancedTag,
                          "missing {% endif %}");
    }
    return std::move(nodes_);
  }

 private:
  void add_literal(std::string_view text) {
    if (text.empty()) return;
    if (open_) {
      auto& branch = current_branch();
      if (!branch.empty()) {
        if (auto* lit = std::get_if<LiteralNode>(&branch.back())) {
          lit->text += text;
          return;
        }
      }
      branch.push_back(LiteralNode{std::string(text)});
      return;
    }
    if (!nodes_.empty()) {
      if (auto* lit = std::get_if<LiteralNode>(&nodes_.back())) {
        lit->text += text;
        return;
      }
    }
    nodes_.push_back(LiteralNode{std::string(text)});
  }

  std::vector<FlatNode>& current_branch() {
    return in_else_ ? open_->else_branch : open_->then_branch;
  }

  std::size_t parse_variable(std::size_t at, std::set<std::string>& ph) {
    const std::size_t close = src_.find("}}", at + 2);
    if (close == std::string_view::npos) {
      throw TemplateError(TemplateError::Kind::UnbalancedTag,
                          "unterminated {{");
    }
    const std::size_t end = close + 2;
    const std::string_view name = trim(src_.substr(at + 2, close - at - 2));
    if (!is_identifier(name)) {
      throw TemplateError(TemplateError::Kind::BadVariable, std::string(name));
    }
    VariableNode node{std::string(name), std::string(src_.substr(at, end - at))};
    ph.insert(node.name);
    if (open_) {
      current_branch().push_back(std::move(node));
    } else {
      nodes_.push_back(std::move(node));
    }
    return end;
  }

  std::size_t parse_tag(std::size_t at, std::set<std::string>& ph) {
    const std::size_t close = src_.find("%}", at + 2);
    if (close == std::string_view::npos) {
      throw TemplateError(TemplateError::Kind::UnbalancedTag,
                          "unterminated {%");
    }
    const std::size_t end = close + 2;
    const std::string raw(src_.substr(at, end - at));
    const std::string inner(trim(src_.substr(at + 2, close - at - 2)));

    if (inner == "else") {
      if (!open_ || in_else_) {
        throw TemplateError(TemplateError::Kind::UnbalancedTag,
                            "{% else %} outside of {% if %}");
      }
      open_->else_raw = raw;
      in_else_ = true;
      return end;
    }
    if (inner == "endif") {
      if (!open_) {
        throw TemplateError(TemplateError::Kind::UnbalancedTag,
                            "{% endif %} without {% if %}");
      }
      open_->endif_raw = raw;
      nodes_.push_back(std::move(*open_));
      open_.reset();
      in_else_ = false;
      return end;
    }
    const std::string keyword = inner.substr(0, inner.find_first_of(" \t\n\r"));
    if (keyword != "if") {
      throw TemplateError(TemplateError::Kind::UnknownTag, keyword);
    }
    if (open_) {
      throw TemplateError(TemplateError::Kind::NestedConditional, inner);
    }
    std::smatch m;
    if (!std::regex_match(inner, m, condition_pattern())) {
      throw TemplateError(TemplateError::Kind::BadCondition, inner);
    }
    open_ = ConditionalNode{};
    open_->var = m[1].str();
    open_->literal = m[2].str();
    open_->open_raw = raw;
    ph.insert(open_->var);
    return end;
  }

  std::string_view src_;
  std::vector<Node> nodes_;
  std::optional<ConditionalNode> open_;
  bool in_else_ = false;
};

void collect_placeholders(const std::vector<FlatNode>& nodes,
                          std::set<std::string>& out) {
  for (const auto& n : nodes) {
    if (const auto* v = std::get_if<VariableNode>(&n)) out.insert(v->name);
  }
}

const std::string& lookup(const std::map<std::string, std::string>& bindings,
                          const std::string& name) {
  auto it = bindings.find(name);
  if (it == bindings.end()) {
    throw TemplateError(TemplateError::Kind::MissingBinding, name);
  }
  return it->second;
}

void render_flat(const std::vector<FlatNode>& nodes,
                 const std::map<std::string, std::string>& bindings,
                 std::string& out) {
  for (const auto& n : nodes) {
    if (const auto* lit = std::get_if<LiteralNode>(&n)) {
      out += lit->text;
    } else {
      out += lookup(bindings, std::get<VariableNode>(n).name);
    }
  }
}

}  // namespace

std::string ConditionalNode::serialize() const {
  std::string out = open_raw;
  out += serialize_flat(then_branch);
  if (else_raw) {
    out += *else_raw;
    out += serialize_flat(else_branch);
  }
  out += endif_raw;
  return out;
}

Template Template::parse(std::string_view raw) {
  if (contains_sentinel_char(raw)) {
    throw TemplateError(TemplateError::Kind::MalformedSentinel,
                        "template text contains a protection sentinel");
  }
  Template t;
  t.raw_ = std::string(raw);
  t.nodes_ = Parser(raw).run(t.placeholders_);
  return t;
}

std::string Template::serialize() const {
  std::string out;
  for (const auto& n : nodes_) {
    std::visit(
        [&out](const auto& node) {
          using N = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<N, LiteralNode>) {
            out += node.text;
          } else if constexpr (std::is_same_v<N, VariableNode>) {
            out += node.raw;
          } else {
            out += node.serialize();
          }
        },
        n);
  }
  return out;
}

std::string Template::id() const { return hex64(fnv1a64(raw_)); }

std::string Template::normalized() const { return normalize_whitespace(raw_); }

std::string render(const Template& t,
                   const std::map<std::string, std::string>& bindings) {
  for (const auto& name : t.placeholders()) lookup(bindings, name);

  std::string out;
  for (const auto& n : t.nodes()) {
    if (const auto* lit = std::get_if<LiteralNode>(&n)) {
      out += lit->text;
    } else if (const auto* var = std::get_if<VariableNode>(&n)) {
      out += lookup(bindings, var->name);
    } else {
      const auto& cond = std::get<ConditionalNode>(n);
      const bool taken = lookup(bindings, cond.var) == cond.literal;
      render_flat(taken ? cond.then_branch : cond.else_branch, bindings, out);
    }
  }
  return out;
}

std::set<std::string> extract_placeholders(const Template& t) {
  std::set<std::string> out;
  for (const auto& n : t.nodes()) {
    if (const auto* var = std::get_if<VariableNode>(&n)) {
      out.insert(var->name);
    } else if (const auto* cond = std::get_if<ConditionalNode>(&n)) {
      out.insert(cond->var);
      collect_placeholders(cond->then_branch, out);
      collect_placeholders(cond->else_branch, out);
    }
  }
  return out;
}

ProtectedText protect(const Template& t) {
  ProtectedText result;
  for (const auto& n : t.nodes()) {
    if (const auto* lit = std::get_if<LiteralNode>(&n)) {
      result.text += lit->text;
      continue;
    }
    std::string token = sentinel_token(result.map.size());
    std::string fragment = std::holds_alternative<VariableNode>(n)
                               ? std::get<VariableNode>(n).raw
                               : std::get<ConditionalNode>(n).serialize();
    result.text += token;
    result.map.emplace_back(std::move(token), std::move(fragment));
  }
  return result;
}

Template restore(std::string_view text, const ProtectionMap& map) {
  std::string out(text);
  for (const auto& [token, fragment] : map) {
    const std::size_t first = out.find(token);
    if (first == std::string::npos) {
      throw TemplateError(TemplateError::Kind::SentinelMissing, token);
    }
    if (out.find(token, first + token.size()) != std::string::npos) {
      throw TemplateError(TemplateError::Kind::SentinelDuplicated, token);
    }
  }
  // Tokens are substituted in a single left-to-right pass so that a fragment
  // can never be mistaken for a later sentinel.
  std::string restored;
  std::size_t pos = 0;
  while (pos < out.size()) {
    std::size_t best = std::string::npos;
    const std::pair<std::string, std::string>* hit = nullptr;
    for (const auto& entry : map) {
      const std::size_t at = out.find(entry.first, pos);
      if (at < best) {
        best = at;
        hit = &entry;
      }
    }
    if (!hit) {
      restored.append(out, pos, std::string::npos);
      break;
    }
    restored.append(out, pos, best - pos);
    restored += hit->second;
    pos = best + hit->first.size();
  }
  return Template::parse(restored);
}

bool validate_for_task(const Template& t, const TaskSpec& schema) {
  for (const auto& name : t.placeholders()) {
    if (!schema.input_fields.contains(name) &&
        !schema.control_fields.contains(name)) {
      return false;
    }
  }
  for (const auto& name : schema.required_placeholders) {
    if (!t.placeholders().contains(name)) return false;
  }
  return true;
}

}  // namespace gps
