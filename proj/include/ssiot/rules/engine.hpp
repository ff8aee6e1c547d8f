// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ssiot/common/sim_clock.hpp"
#include "ssiot/rules/ast.hpp"

namespace ssiot::rules {

// Result schema produced by inference apps.
struct ResultFields {
  std::string label;
  double score = 0;
  bool operator==(const ResultFields&) const = default;
};

struct ThingChange {
  std::string thing_id;
  std::string from_state;
  std::string to_state;
};

struct ItemUpdate {
  std::string item_id;
  std::optional<ResultFields> result;
};

using Event = std::variant<ThingChange, ItemUpdate>;
using Action = std::variant<SendCommand, SendNotification>;

struct ItemState {
  std::string item_id;
  std::optional<ResultFields> last_result;
  SimTime last_updated;
  std::uint64_t updates = 0;
};

class UnknownItem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ItemRegistry {
 public:
  void declare(const std::string& item_id);
  bool known(const std::string& item_id) const;
  // Throws UnknownItem for undeclared items.
  ItemState update(const std::string& item_id, std::optional<ResultFields> result, SimTime at);
  std::optional<ItemState> get(const std::string& item_id) const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, ItemState> items_;
};

// True iff every atom holds. Without a result payload no atom holds.
bool holds(const Condition& condition, const std::optional<ResultFields>& result);

// Matching rules in file order; their actions in order. Item updates are
// applied to `items` first.
std::vector<Action> evaluate(const Event& event, const RuleSet& rules, ItemRegistry& items,
                             SimTime at = {});

class UnknownBinding : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Receiver of sendCommand actions (the hub).
class ActionTarget {
 public:
  virtual ~ActionTarget() = default;
  // Throws UnknownBinding when nothing is bound to `item_id`.
  virtual void submit_command(const std::string& item_id, const std::string& command,
                              SimTime at) = 0;
};

struct Notification {
  SimTime at;
  std::string text;
};

// JSON-lines file plus optional webhook (POST of the same JSON object).
class NotificationSink {
 public:
  explicit NotificationSink(std::string jsonl_path = {}, std::string webhook_url = {});

  void notify(const std::string& text, SimTime at);
  std::vector<Notification> entries() const;
  std::size_t size() const;
  std::size_t webhook_failures() const;

 private:
  mutable std::mutex mu_;
  std::string path_;
  std::string webhook_;
  std::vector<Notification> entries_;
  std::size_t webhook_failures_ = 0;
};

class RuleEngine {
 public:
  RuleEngine(RuleSet rules, ItemRegistry& items, NotificationSink& sink,
             ActionTarget* target = nullptr);

  // Evaluates and dispatches; returns the actions that were produced.
  std::vector<Action> on_event(const Event& event, SimTime at);
  // Unknown bindings are logged and counted, never thrown.
  void dispatch(const Action& action, SimTime at);

  void set_target(ActionTarget* target) { target_ = target; }
  const RuleSet& rules() const { return rules_; }
  std::size_t dispatch_errors() const { return dispatch_errors_; }

 private:
  RuleSet rules_;
  ItemRegistry& items_;
  NotificationSink& sink_;
  ActionTarget* target_;
  std::size_t dispatch_errors_ = 0;
};

}  // namespace ssiot::rules
