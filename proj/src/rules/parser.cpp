// SPDX-License-Identifier: Apache-2.0
#include <cctype>
#include <charconv>
#include <optional>
#include <set>

#include "ssiot/rules/ast.hpp"

namespace ssiot::rules {

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::kEq: return "==";
    case CompareOp::kGt: return ">";
    case CompareOp::kGe: return ">=";
    case CompareOp::kLt: return "<";
    case CompareOp::kLe: return "<=";
  }
  return "==";
}

bool operator==(const If& a, const If& b) { return a.condition == b.condition && a.body == b.body; }
bool operator==(const Statement& a, const Statement& b) { return a.node == b.node; }

ParseError::ParseError(SourceLocation at, const std::string& message)
    : std::runtime_error(std::to_string(at.line) + ":" + std::to_string(at.column) + ": " + message),
      at_(at),
      message_(message) {}

namespace {

enum class Tok { kIdent, kString, kNumber, kPunct, kEnd };

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;  // identifier, unescaped string, number literal or punctuation
  SourceLocation at;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.at = {line_, col_};
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      const char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Tok::kIdent;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          t.text += advance();
        }
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        t.kind = Tok::kNumber;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) t.text += advance();
        if (pos_ < src_.size() && src_[pos_] == '.') {
          t.text += advance();
          if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            throw ParseError(t.at, "malformed number '" + t.text + "'");
          }
          while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) t.text += advance();
        }
      } else if (c == '"') {
        t.kind = Tok::kString;
        advance();
        for (;;) {
          if (pos_ >= src_.size() || src_[pos_] == '\n') {
            throw ParseError(t.at, "unterminated string literal");
          }
          char ch = advance();
          if (ch == '"') break;
          if (ch == '\\') {
            if (pos_ >= src_.size()) throw ParseError(t.at, "unterminated string literal");
            char esc = advance();
            if (esc != '"' && esc != '\\') {
              throw ParseError({line_, col_ - 1}, std::string("unknown escape '\\") + esc + "'");
            }
            ch = esc;
          }
          t.text += ch;
        }
      } else {
        t.kind = Tok::kPunct;
        static constexpr std::string_view kTwo[] = {"&&", "==", ">=", "<="};
        for (auto two : kTwo) {
          if (src_.substr(pos_, 2) == two) {
            t.text = std::string(two);
            advance();
            advance();
            break;
          }
        }
        if (t.text.empty()) {
          if (std::string_view(".(){}<>").find(c) == std::string_view::npos) {
            throw ParseError(t.at, std::string("unexpected character '") + c + "'");
          }
          t.text = std::string(1, advance());
        }
      }
      out.push_back(std::move(t));
    }
  }

 private:
  char advance() {
    const char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::kEnd: return "end of input";
    case Tok::kString: return "string \"" + t.text + "\"";
    case Tok::kNumber: return "number " + t.text;
    default: return "'" + t.text + "'";
  }
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  RuleSet ruleset() {
    RuleSet out;
    std::set<std::string> names;
    while (peek().kind != Tok::kEnd) {
      Rule r = rule();
      if (!names.insert(r.name).second) {
        throw ParseError(r.location, "duplicate rule name \"" + r.name + "\"");
      }
      out.rules.push_back(std::move(r));
    }
    return out;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  bool is_word(const Token& t, std::string_view w) const { return t.kind == Tok::kIdent && t.text == w; }
  bool is_punct(const Token& t, std::string_view p) const { return t.kind == Tok::kPunct && t.text == p; }

  [[noreturn]] void fail(const Token& t, const std::string& expected) const {
    throw ParseError(t.at, "expected " + expected + ", found " + describe(t));
  }

  void word(std::string_view w) {
    if (!is_word(peek(), w)) fail(peek(), "'" + std::string(w) + "'");
    take();
  }
  void punct(std::string_view p) {
    if (!is_punct(peek(), p)) fail(peek(), "'" + std::string(p) + "'");
    take();
  }
  std::string string_lit(const char* what) {
    if (peek().kind != Tok::kString) fail(peek(), what);
    std::string s = take().text;
    return s;
  }
  std::string nonempty_string(const char* what) {
    const Token& t = peek();
    std::string s = string_lit(what);
    if (s.empty()) throw ParseError(t.at, std::string(what) + " must not be empty");
    return s;
  }

  Rule rule() {
    Rule r;
    r.location = peek().at;
    word("rule");
    r.name = nonempty_string("rule name string");
    word("when");
    r.trigger = trigger();
    word("then");
    while (!is_word(peek(), "end")) {
      if (peek().kind == Tok::kEnd || is_word(peek(), "rule")) {
        throw ParseError(peek().at, "rule \"" + r.name + "\" is not terminated by 'end'");
      }
      r.body.push_back(statement());
    }
    take();
    return r;
  }

  Trigger trigger() {
    if (is_word(peek(), "Thing")) {
      take();
      ThingChanged t;
      t.thing_id = nonempty_string("thing id string");
      word("changed");
      word("from");
      t.from_state = string_lit("state string");
      word("to");
      t.to_state = string_lit("state string");
      return t;
    }
    if (is_word(peek(), "Item")) {
      take();
      ItemUpdated t;
      t.item_id = nonempty_string("item id string");
      word("received");
      word("update");
      return t;
    }
    fail(peek(), "'Thing' or 'Item' trigger");
  }

  Statement statement() {
    const Token& t = peek();
    if (is_word(t, "if")) {
      take();
      If node;
      node.condition = condition();
      punct("{");
      while (!is_punct(peek(), "}")) {
        if (peek().kind == Tok::kEnd || is_word(peek(), "end")) fail(peek(), "'}'");
        node.body.push_back(statement());
      }
      take();
      return {std::move(node)};
    }
    if (is_word(t, "sendNotification")) {
      take();
      punct("(");
      SendNotification n{string_lit("notification text string")};
      punct(")");
      return {std::move(n)};
    }
    if (t.kind == Tok::kIdent && !is_word(t, "end")) {
      SendCommand c;
      c.item_id = take().text;
      punct(".");
      word("sendCommand");
      punct("(");
      c.command = nonempty_string("command string");
      punct(")");
      return {std::move(c)};
    }
    fail(t, "statement");
  }

  Condition condition() {
    Condition c;
    c.atoms.push_back(atom());
    while (is_punct(peek(), "&&")) {
      take();
      c.atoms.push_back(atom());
    }
    return c;
  }

  Comparison atom() {
    const Token& field = peek();
    if (is_word(field, "label")) {
      take();
      punct("==");
      return {"label", CompareOp::kEq, string_lit("label string")};
    }
    if (is_word(field, "score")) {
      take();
      const Token& op_tok = peek();
      CompareOp op;
      if (is_punct(op_tok, ">")) {
        op = CompareOp::kGt;
      } else if (is_punct(op_tok, ">=")) {
        op = CompareOp::kGe;
      } else if (is_punct(op_tok, "<")) {
        op = CompareOp::kLt;
      } else if (is_punct(op_tok, "<=")) {
        op = CompareOp::kLe;
      } else {
        fail(op_tok, "'>', '>=', '<' or '<='");
      }
      take();
      const Token& num = peek();
      if (num.kind != Tok::kNumber) fail(num, "number");
      double v = 0;
      auto [ptr, ec] = std::from_chars(num.text.data(), num.text.data() + num.text.size(), v);
      if (ec != std::errc() || ptr != num.text.data() + num.text.size()) fail(num, "number");
      take();
      return {"score", op, v};
    }
    fail(field, "'label' or 'score'");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string number(double v) {
  // Shortest fixed-notation text that round-trips; the grammar has no exponents.
  char buf[400];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  std::string s(buf, ptr);
  if (s.find('.') == std::string::npos) s += ".0";
  return s;
}

void print_body(std::string& out, const std::vector<Statement>& body, int depth) {
  const std::string pad(static_cast<std::size_t>(depth) * 4, ' ');
  for (const auto& st : body) {
    if (auto* c = std::get_if<SendCommand>(&st.node)) {
      out += pad + c->item_id + ".sendCommand(" + quote(c->command) + ")\n";
    } else if (auto* n = std::get_if<SendNotification>(&st.node)) {
      out += pad + "sendNotification(" + quote(n->text) + ")\n";
    } else {
      const auto& node = std::get<If>(st.node);
      out += pad + "if ";
      for (std::size_t i = 0; i < node.condition.atoms.size(); ++i) {
        const auto& a = node.condition.atoms[i];
        if (i) out += " && ";
        out += a.field + " " + std::string(to_string(a.op)) + " ";
        out += std::holds_alternative<std::string>(a.value) ? quote(std::get<std::string>(a.value))
                                                            : number(std::get<double>(a.value));
      }
      out += " {\n";
      print_body(out, node.body, depth + 1);
      out += pad + "}\n";
    }
  }
}

}  // namespace

RuleSet parse_rules(std::string_view source) { return Parser(Lexer(source).run()).ruleset(); }

std::string print(const RuleSet& rules) {
  std::string out;
  for (std::size_t i = 0; i < rules.rules.size(); ++i) {
    const auto& r = rules.rules[i];
    if (i) out += "\n";
    out += "rule " + quote(r.name) + "\nwhen\n";
    if (auto* t = std::get_if<ThingChanged>(&r.trigger)) {
      out += "    Thing " + quote(t->thing_id) + " changed from " + quote(t->from_state) + " to " +
             quote(t->to_state) + "\n";
    } else {
      out += "    Item " + quote(std::get<ItemUpdated>(r.trigger).item_id) + " received update\n";
    }
    out += "then\n";
    print_body(out, r.body, 1);
    out += "end\n";
  }
  return out;
}

}  // namespace ssiot::rules
