#include "guide/taskspec.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

namespace guide::taskspec {

namespace {

struct Token {
  enum class Type { Word, Number, LParen, RParen, End };
  Type type = Type::End;
  std::string text;
  double value = 0.0;
  std::size_t offset = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    Token t;
    t.offset = pos_;
    if (pos_ >= src_.size()) {
      t.type = Token::Type::End;
      return t;
    }
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      t.type = Token::Type::LParen;
      t.text = "(";
      return t;
    }
    if (c == ')') {
      ++pos_;
      t.type = Token::Type::RParen;
      t.text = ")";
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
        ++pos_;
      t.type = Token::Type::Number;
      t.text = std::string(src_.substr(start, pos_ - start));
      char* end = nullptr;
      t.value = std::strtod(t.text.c_str(), &end);
      if (end != t.text.c_str() + t.text.size())
        throw ParseError(ParseError::Kind::Syntax, start, "malformed number '" + t.text + "'");
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      t.type = Token::Type::Word;
      t.text = std::string(src_.substr(start, pos_ - start));
      return t;
    }
    throw ParseError(ParseError::Kind::Syntax, pos_,
                     std::string("unexpected character '") + c + "'");
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  Parser(std::string_view src, const std::set<std::string>& regions)
      : lex_(src), regions_(regions) {
    advance();
  }

  ParsedTask parse() {
    ParsedTask task;
    if (cur_.type == Token::Type::End)
      throw ParseError(ParseError::Kind::EmptyTask, 0, "empty task description");
    if (cur_.type == Token::Type::Word && (cur_.text == "avoiding" || cur_.text == "keep"))
      throw ParseError(ParseError::Kind::EmptyTask, cur_.offset,
                       "task has constraints but no subtask clause");

    task.subtasks.push_back(clause(0));
    while (accept_word("then")) task.subtasks.push_back(clause(static_cast<int>(task.subtasks.size())));
    while (cur_.type == Token::Type::Word && (cur_.text == "avoiding" || cur_.text == "keep"))
      task.constraints.push_back(avoidance());
    if (cur_.type != Token::Type::End)
      throw ParseError(ParseError::Kind::Syntax, cur_.offset,
                       "trailing input '" + cur_.text + "'");
    task.family = derive_family(task.subtasks, task.constraints);
    return task;
  }

 private:
  void advance() { cur_ = lex_.next(); }

  bool accept_word(std::string_view w) {
    if (cur_.type == Token::Type::Word && cur_.text == w) {
      advance();
      return true;
    }
    return false;
  }

  void expect_word(std::string_view w) {
    if (!accept_word(w))
      throw ParseError(ParseError::Kind::Syntax, cur_.offset,
                       "expected '" + std::string(w) + "'");
  }

  double expect_number() {
    if (cur_.type != Token::Type::Number)
      throw ParseError(ParseError::Kind::Syntax, cur_.offset, "expected a number");
    double v = cur_.value;
    advance();
    return v;
  }

  std::string expect_region() {
    if (cur_.type != Token::Type::Word)
      throw ParseError(ParseError::Kind::Syntax, cur_.offset, "expected a region identifier");
    if (!regions_.count(cur_.text))
      throw ParseError(ParseError::Kind::UnknownRegion, cur_.offset,
                       "unknown region '" + cur_.text + "'");
    std::string r = cur_.text;
    advance();
    return r;
  }

  SubTask clause(int order) {
    SubTask st;
    st.order = order;
    if (accept_word("reach"))
      st.kind = SubTaskKind::GoalReach;
    else if (accept_word("visit"))
      st.kind = SubTaskKind::Visit;
    else if (accept_word("patrol"))
      st.kind = SubTaskKind::Patrol;
    else
      throw ParseError(ParseError::Kind::Syntax, cur_.offset,
                       "expected 'reach', 'visit' or 'patrol'");
    st.region_id = expect_region();
    if (cur_.type == Token::Type::LParen) {
      advance();
      expect_word("priority");
      std::size_t at = cur_.offset;
      st.priority = expect_number();
      if (st.priority < 0.0 || st.priority > 1.0)
        throw ParseError(ParseError::Kind::Syntax, at, "priority must lie in [0,1]");
      if (cur_.type != Token::Type::RParen)
        throw ParseError(ParseError::Kind::Syntax, cur_.offset, "expected ')'");
      advance();
    }
    return st;
  }

  Constraint avoidance() {
    Constraint c;
    if (accept_word("avoiding")) {
      c.kind = ConstraintKind::Avoid;
      c.region_id = expect_region();
      if (accept_word("by")) {
        c.margin = expect_number();
        expect_word("m");
      }
      return c;
    }
    expect_word("keep");
    c.kind = ConstraintKind::StandOff;
    c.margin = expect_number();
    expect_word("m");
    expect_word("from");
    c.region_id = expect_region();
    return c;
  }

  Lexer lex_;
  Token cur_;
  const std::set<std::string>& regions_;
};

std::string format_real(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

TaskFamily derive_family(const std::vector<SubTask>& subtasks,
                         const std::vector<Constraint>& constraints) {
  int goals = 0;
  for (const auto& st : subtasks) {
    if (st.kind == SubTaskKind::Patrol) return TaskFamily::PT;
    ++goals;
  }
  if (goals >= 2) return TaskFamily::MG;
  return constraints.empty() ? TaskFamily::GR : TaskFamily::AV;
}

ParsedTask parse_task(const TaskDescription& desc,
                      const std::set<std::string>& known_regions) {
  return Parser(desc.text, known_regions).parse();
}

std::string normalize_task(const ParsedTask& task) {
  if (task.subtasks.empty())
    throw std::invalid_argument("cannot serialize a task without subtasks");
  std::string out;
  for (std::size_t i = 0; i < task.subtasks.size(); ++i) {
    const auto& st = task.subtasks[i];
    if (i > 0) out += " then ";
    out += kind_word(st.kind);
    out += ' ';
    out += st.region_id;
    if (st.priority != 1.0) out += " (priority " + format_real(st.priority) + ")";
  }
  for (const auto& c : task.constraints) {
    if (c.kind == ConstraintKind::Avoid) {
      out += " avoiding " + c.region_id;
      if (c.margin != 0.0) out += " by " + format_real(c.margin) + " m";
    } else {
      out += " keep " + format_real(c.margin) + " m from " + c.region_id;
    }
  }
  return out;
}

const char* kind_word(SubTaskKind k) {
  switch (k) {
    case SubTaskKind::GoalReach: return "reach";
    case SubTaskKind::Visit: return "visit";
    case SubTaskKind::Patrol: return "patrol";
  }
  return "reach";
}

const char* kind_word(ConstraintKind k) {
  return k == ConstraintKind::Avoid ? "avoiding" : "keep";
}

}  // namespace guide::taskspec
