#pragma once

#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace guide::taskspec {

// Task DSL grammar:
//   task       := clause { "then" clause } { avoidance } ;
//   clause     := ("reach" | "visit" | "patrol") region [ "(priority" REAL ")" ] ;
//   avoidance  := "avoiding" region [ "by" REAL "m" ] | "keep" REAL "m" "from" region ;
//   region     := IDENTIFIER ;
// "keep M m from R" yields a StandOff constraint with margin M;
// "avoiding R by M m" yields an Avoid constraint with margin M (default 0).

enum class SubTaskKind { GoalReach, Visit, Patrol };
enum class ConstraintKind { Avoid, StandOff };
enum class TaskFamily { GR, AV, PT, MG };

struct SubTask {
  SubTaskKind kind = SubTaskKind::GoalReach;
  std::string region_id;
  int order = 0;
  double priority = 1.0;

  bool operator==(const SubTask&) const = default;
};

struct Constraint {
  ConstraintKind kind = ConstraintKind::Avoid;
  std::string region_id;
  double margin = 0.0;  // meters, >= 0

  bool operator==(const Constraint&) const = default;
};

struct ParsedTask {
  std::vector<SubTask> subtasks;  // ordered by SubTask::order
  std::vector<Constraint> constraints;
  TaskFamily family = TaskFamily::GR;

  bool operator==(const ParsedTask&) const = default;
};

struct TaskDescription {
  std::string text;
};

class ParseError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnknownRegion, EmptyTask };

  ParseError(Kind kind, std::size_t offset, const std::string& msg)
      : std::runtime_error(msg), kind_(kind), offset_(offset) {}

  Kind kind() const { return kind_; }
  std::size_t offset() const { return offset_; }  // byte offset into the input

 private:
  Kind kind_;
  std::size_t offset_;
};

// family derivation rule: PT iff a Patrol subtask exists; else MG iff >= 2
// goal/visit subtasks; else AV iff any constraint; else GR.
TaskFamily derive_family(const std::vector<SubTask>& subtasks,
                         const std::vector<Constraint>& constraints);

ParsedTask parse_task(const TaskDescription& desc,
                      const std::set<std::string>& known_regions);

// Canonical text form; parse_task(normalize_task(t)) is structurally equal
// to t. Throws std::invalid_argument on a task without subtasks.
std::string normalize_task(const ParsedTask& task);

const char* kind_word(SubTaskKind k);
const char* kind_word(ConstraintKind k);

}  // namespace guide::taskspec
