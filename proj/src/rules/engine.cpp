// SPDX-License-Identifier: Apache-2.0
#include "ssiot/rules/engine.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>

namespace ssiot::rules {

void ItemRegistry::declare(const std::string& item_id) {
  std::lock_guard lock(mu_);
  items_.try_emplace(item_id, ItemState{item_id, std::nullopt, {}, 0});
}

bool ItemRegistry::known(const std::string& item_id) const {
  std::lock_guard lock(mu_);
  return items_.count(item_id) > 0;
}

ItemState ItemRegistry::update(const std::string& item_id, std::optional<ResultFields> result,
                               SimTime at) {
  std::lock_guard lock(mu_);
  auto it = items_.find(item_id);
  if (it == items_.end()) throw UnknownItem("unknown item '" + item_id + "'");
  it->second.last_result = std::move(result);
  it->second.last_updated = at;
  ++it->second.updates;
  return it->second;
}

std::optional<ItemState> ItemRegistry::get(const std::string& item_id) const {
  std::lock_guard lock(mu_);
  if (auto it = items_.find(item_id); it != items_.end()) return it->second;
  return std::nullopt;
}

namespace {

bool atom_holds(const Comparison& a, const ResultFields& r) {
  if (a.field == "label") return a.op == CompareOp::kEq && r.label == std::get<std::string>(a.value);
  if (a.field != "score" || !std::holds_alternative<double>(a.value)) return false;
  const double v = std::get<double>(a.value);
  switch (a.op) {
    case CompareOp::kGt: return r.score > v;
    case CompareOp::kGe: return r.score >= v;
    case CompareOp::kLt: return r.score < v;
    case CompareOp::kLe: return r.score <= v;
    case CompareOp::kEq: return false;
  }
  return false;
}

void collect(const std::vector<Statement>& body, const std::optional<ResultFields>& result,
             std::vector<Action>& out) {
  for (const auto& st : body) {
    if (auto* c = std::get_if<SendCommand>(&st.node)) {
      out.emplace_back(*c);
    } else if (auto* n = std::get_if<SendNotification>(&st.node)) {
      out.emplace_back(*n);
    } else {
      const auto& node = std::get<If>(st.node);
      if (holds(node.condition, result)) collect(node.body, result, out);
    }
  }
}

}  // namespace

bool holds(const Condition& condition, const std::optional<ResultFields>& result) {
  if (!result) return false;
  for (const auto& a : condition.atoms) {
    if (!atom_holds(a, *result)) return false;
  }
  return true;
}

std::vector<Action> evaluate(const Event& event, const RuleSet& rules, ItemRegistry& items,
                             SimTime at) {
  std::optional<ResultFields> result;
  if (auto* u = std::get_if<ItemUpdate>(&event)) {
    items.update(u->item_id, u->result, at);
    result = u->result;
  }
  std::vector<Action> out;
  for (const auto& rule : rules.rules) {
    bool match = false;
    if (auto* t = std::get_if<ThingChanged>(&rule.trigger)) {
      auto* e = std::get_if<ThingChange>(&event);
      match = e && e->thing_id == t->thing_id && e->from_state == t->from_state &&
              e->to_state == t->to_state;
    } else {
      auto* e = std::get_if<ItemUpdate>(&event);
      match = e && e->item_id == std::get<ItemUpdated>(rule.trigger).item_id;
    }
    if (match) collect(rule.body, result, out);
  }
  return out;
}

NotificationSink::NotificationSink(std::string jsonl_path, std::string webhook_url)
    : path_(std::move(jsonl_path)), webhook_(std::move(webhook_url)) {
  if (!path_.empty()) {
    auto parent = std::filesystem::path(path_).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
  }
}

void NotificationSink::notify(const std::string& text, SimTime at) {
  const nlohmann::json line{{"at_ms", to_ms(at)}, {"text", text}};
  std::lock_guard lock(mu_);
  entries_.push_back({at, text});
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    out << line.dump() << '\n';
  }
  if (!webhook_.empty()) {
    const auto scheme_end = webhook_.find("://");
    const auto path_start =
        webhook_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string base = webhook_.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : webhook_.substr(path_start);
    httplib::Client client(base);
    client.set_connection_timeout(std::chrono::seconds(2));
    auto res = client.Post(path, line.dump(), "application/json");
    if (!res || res->status >= 300) {
      ++webhook_failures_;
      spdlog::warn("notification webhook {} failed", webhook_);
    }
  }
}

std::vector<Notification> NotificationSink::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t NotificationSink::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::size_t NotificationSink::webhook_failures() const {
  std::lock_guard lock(mu_);
  return webhook_failures_;
}

RuleEngine::RuleEngine(RuleSet rules, ItemRegistry& items, NotificationSink& sink,
                       ActionTarget* target)
    : rules_(std::move(rules)), items_(items), sink_(sink), target_(target) {}

std::vector<Action> RuleEngine::on_event(const Event& event, SimTime at) {
  auto actions = evaluate(event, rules_, items_, at);
  for (const auto& a : actions) dispatch(a, at);
  return actions;
}

void RuleEngine::dispatch(const Action& action, SimTime at) {
  if (auto* n = std::get_if<SendNotification>(&action)) {
    sink_.notify(n->text, at);
    return;
  }
  const auto& cmd = std::get<SendCommand>(action);
  if (!target_) {
    ++dispatch_errors_;
    spdlog::error("no action target for command {} on {}", cmd.command, cmd.item_id);
    return;
  }
  try {
    target_->submit_command(cmd.item_id, cmd.command, at);
  } catch (const UnknownBinding& e) {
    ++dispatch_errors_;
    spdlog::error("dropped command {}: {}", cmd.command, e.what());
  }
}

}  // namespace ssiot::rules
