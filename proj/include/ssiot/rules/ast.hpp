// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ssiot::rules {

struct ThingChanged {
  std::string thing_id;
  std::string from_state;
  std::string to_state;
  bool operator==(const ThingChanged&) const = default;
};

struct ItemUpdated {
  std::string item_id;
  bool operator==(const ItemUpdated&) const = default;
};

using Trigger = std::variant<ThingChanged, ItemUpdated>;

enum class CompareOp { kEq, kGt, kGe, kLt, kLe };
std::string_view to_string(CompareOp op);

// `label == "person"` or `score > 0.80`.
struct Comparison {
  std::string field;
  CompareOp op = CompareOp::kEq;
  std::variant<std::string, double> value;
  bool operator==(const Comparison&) const = default;
};

// Conjunction of comparisons.
struct Condition {
  std::vector<Comparison> atoms;
  bool operator==(const Condition&) const = default;
};

struct SendCommand {
  std::string item_id;
  std::string command;
  bool operator==(const SendCommand&) const = default;
};

struct SendNotification {
  std::string text;
  bool operator==(const SendNotification&) const = default;
};

struct Statement;

struct If {
  Condition condition;
  std::vector<Statement> body;
};

struct Statement {
  std::variant<SendCommand, SendNotification, If> node;
};

bool operator==(const If& a, const If& b);
bool operator==(const Statement& a, const Statement& b);

struct SourceLocation {
  int line = 1;
  int column = 1;
};

struct Rule {
  std::string name;
  Trigger trigger;
  std::vector<Statement> body;
  SourceLocation location;  // not part of equality

  bool operator==(const Rule& o) const {
    return name == o.name && trigger == o.trigger && body == o.body;
  }
};

struct RuleSet {
  std::vector<Rule> rules;
  bool operator==(const RuleSet&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(SourceLocation at, const std::string& message);
  SourceLocation location() const { return at_; }
  const std::string& message() const { return message_; }

 private:
  SourceLocation at_;
  std::string message_;
};

// Grammar:
//   ruleset := rule*
//   rule    := 'rule' STRING 'when' trigger 'then' stmt* 'end'
//   trigger := 'Thing' STRING 'changed' 'from' STRING 'to' STRING
//            | 'Item' STRING 'received' 'update'
//   stmt    := ID '.' 'sendCommand' '(' STRING ')'
//            | 'sendNotification' '(' STRING ')'
//            | 'if' cond '{' stmt* '}'
//   cond    := atom ('&&' atom)*
//   atom    := 'label' '==' STRING | 'score' ('>'|'>='|'<'|'<=') NUMBER
RuleSet parse_rules(std::string_view source);

// Canonical text; parse_rules(print(r)) == r.
std::string print(const RuleSet& rules);

}  // namespace ssiot::rules
