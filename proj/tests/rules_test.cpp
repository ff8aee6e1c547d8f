// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ssiot/rules/ast.hpp"
#include "ssiot/rules/engine.hpp"

#ifndef SSIOT_CONFIG_DIR
#error "SSIOT_CONFIG_DIR must be defined"
#endif

namespace ssiot::rules {
namespace {

std::string doorbell_source() {
  std::ifstream in(std::string(SSIOT_CONFIG_DIR) + "/doorbell.rules");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ParseError parse_error_of(std::string_view src) {
  try {
    parse_rules(src);
  } catch (const ParseError& e) {
    return e;
  }
  ADD_FAILURE() << "expected a parse error for:\n" << src;
  return ParseError({0, 0}, "none");
}

TEST(Parse, DoorbellRules) {
  auto rs = parse_rules(doorbell_source());
  ASSERT_EQ(rs.rules.size(), 2u);
  EXPECT_EQ(rs.rules[0].name, "Rule#1");
  EXPECT_EQ(rs.rules[0].trigger, Trigger(ThingChanged{"sensor_1", "off", "on"}));
  ASSERT_EQ(rs.rules[0].body.size(), 1u);
  EXPECT_EQ(rs.rules[0].body[0], (Statement{SendCommand{"ssiot_object_detection", "REFRESH"}}));

  EXPECT_EQ(rs.rules[1].trigger, Trigger(ItemUpdated{"ssiot_object_detection"}));
  const auto& cond = std::get<If>(rs.rules[1].body.at(0).node);
  ASSERT_EQ(cond.condition.atoms.size(), 2u);
  EXPECT_EQ(cond.condition.atoms[0], (Comparison{"label", CompareOp::kEq, std::string("person")}));
  EXPECT_EQ(cond.condition.atoms[1], (Comparison{"score", CompareOp::kGt, 0.80}));
  EXPECT_EQ(cond.body.at(0), (Statement{SendNotification{"detected a person"}}));
  EXPECT_EQ(rs.rules[1].location.line, 8);
}

TEST(Parse, DoorbellFileIsShort) {
  const auto src = doorbell_source();
  EXPECT_LE(std::count(src.begin(), src.end(), '\n'), 18);
}

TEST(Parse, EmptySource) {
  EXPECT_TRUE(parse_rules("").rules.empty());
  EXPECT_TRUE(parse_rules("  \n\t\n").rules.empty());
}

TEST(Parse, MissingEndNamesTheRule) {
  auto e = parse_error_of("rule \"R1\"\nwhen\n  Item \"x\" received update\nthen\n  sendNotification(\"hi\")\n");
  EXPECT_NE(e.message().find("\"R1\""), std::string::npos) << e.what();
  EXPECT_NE(e.message().find("'end'"), std::string::npos);
  EXPECT_EQ(e.location().line, 6);

  auto e2 = parse_error_of("rule \"A\" when Item \"x\" received update then\nrule \"B\" when Item \"y\" received update then end");
  EXPECT_NE(e2.message().find("\"A\""), std::string::npos);
  EXPECT_EQ(e2.location().line, 2);
  EXPECT_EQ(e2.location().column, 1);
}

TEST(Parse, ErrorsCarryLocations) {
  auto e = parse_error_of("rule \"R\" when\n  Thing \"s\" changed to \"on\" then end");
  EXPECT_EQ(e.location().line, 2);
  EXPECT_EQ(e.location().column, 21);
  EXPECT_NE(std::string(e.what()).find("2:21"), std::string::npos);

  EXPECT_EQ(parse_error_of("rule \"R\" when Item \"x\" received update then\n  if score == 0.5 { } end")
                .location()
                .line,
            2);
  parse_error_of("rule \"R\" when Item \"x\" received update then if label > 0.5 { } end");
  parse_error_of("rule \"R\" when Item \"x\" received update then if colour == \"red\" { } end");
  parse_error_of("rule \"R\" when Item \"x\" received update then if score > 1e3 { } end");
  parse_error_of("rule \"R\" when Item \"x\" received update then if score > -1 { } end");
  parse_error_of("rule \"R\" when Item \"x\" received update then if label == \"a\" || score > 0.1 { } end");
  parse_error_of("rule \"R\" when Item \"x\" received update then x.sendCommand(REFRESH) end");
  parse_error_of("rule \"R\" when Item \"x\" received update then x.postUpdate(\"1\") end");
  parse_error_of("rule \"\" when Item \"x\" received update then end");
  parse_error_of("rule \"R\" when Item \"x\" received update then sendNotification(\"open) end");
  parse_error_of("rule \"R\" when Item \"x\" changed then end");
  parse_error_of("rule \"R\" when Item \"x\" received update then if score > 0.5 { end");
  parse_error_of("// comment\nrule \"R\" when Item \"x\" received update then end");
}

TEST(Parse, DuplicateRuleName) {
  auto e = parse_error_of(
      "rule \"R\" when Item \"x\" received update then end\n"
      "rule \"R\" when Item \"y\" received update then end\n");
  EXPECT_EQ(e.location().line, 2);
  EXPECT_NE(e.message().find("duplicate"), std::string::npos);
}

TEST(Parse, EscapesAndNesting) {
  auto rs = parse_rules(R"(rule "say \"hi\" \\ bye" when Thing "t" changed from "" to "x" then
    if score >= 0.25 && score <= 0.5 && label == "cat" {
        if score < 0.3 { door.sendCommand("LOCK") }
        sendNotification("cat")
    }
end)");
  ASSERT_EQ(rs.rules.size(), 1u);
  EXPECT_EQ(rs.rules[0].name, "say \"hi\" \\ bye");
  EXPECT_EQ(parse_rules(print(rs)), rs);
}

// Random rule sets for the print/parse fixpoint.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  RuleSet ruleset() {
    RuleSet rs;
    const int n = pick(0, 4);
    for (int i = 0; i < n; ++i) {
      Rule r;
      r.name = text(true) + "#" + std::to_string(i);
      if (pick(0, 1)) {
        r.trigger = ThingChanged{text(true), text(false), text(false)};
      } else {
        r.trigger = ItemUpdated{text(true)};
      }
      r.body = body(0);
      rs.rules.push_back(std::move(r));
    }
    return rs;
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  std::string text(bool nonempty) {
    static constexpr std::string_view kAlphabet = "abcXYZ09 _#\"\\-.{}()&=<>";
    std::string s;
    const int len = pick(nonempty ? 1 : 0, 8);
    for (int i = 0; i < len; ++i) s += kAlphabet[static_cast<std::size_t>(pick(0, kAlphabet.size() - 1))];
    return s;
  }

  std::string ident() {
    static constexpr std::string_view kHead = "abcxyz_";
    std::string s(1, kHead[static_cast<std::size_t>(pick(0, kHead.size() - 1))]);
    for (int i = pick(0, 6); i > 0; --i) s += "ab_19"[pick(0, 4)];
    if (s == "if" || s == "end" || s == "sendNotification") s += "_";
    return s;
  }

  std::vector<Statement> body(int depth) {
    std::vector<Statement> out;
    for (int i = pick(0, 3); i > 0; --i) {
      switch (depth < 2 ? pick(0, 2) : pick(0, 1)) {
        case 0: out.push_back({SendCommand{ident(), text(true)}}); break;
        case 1: out.push_back({SendNotification{text(false)}}); break;
        default: {
          If node;
          for (int k = pick(1, 3); k > 0; --k) {
            if (pick(0, 1)) {
              node.condition.atoms.push_back({"label", CompareOp::kEq, text(false)});
            } else {
              static constexpr CompareOp kOps[] = {CompareOp::kGt, CompareOp::kGe, CompareOp::kLt,
                                                   CompareOp::kLe};
              const double v = std::uniform_real_distribution<double>(0, pick(0, 1) ? 1.0 : 1e6)(rng_);
              node.condition.atoms.push_back({"score", kOps[pick(0, 3)], v});
            }
          }
          node.body = body(depth + 1);
          out.push_back({std::move(node)});
        }
      }
    }
    return out;
  }

  std::mt19937_64 rng_;
};

TEST(Parse, PrintParseFixpointProperty) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    RuleSet rs = Gen(seed).ruleset();
    const std::string printed = print(rs);
    RuleSet back;
    try {
      back = parse_rules(printed);
    } catch (const ParseError& e) {
      FAIL() << "seed " << seed << ": " << e.what() << "\n" << printed;
    }
    ASSERT_EQ(back, rs) << "seed " << seed << "\n" << printed;
    ASSERT_EQ(print(back), printed);
  }
}

class EvalTest : public ::testing::Test {
 protected:
  void SetUp() override { items.declare("ssiot_object_detection"); }
  RuleSet rules = parse_rules(doorbell_source());
  ItemRegistry items;
};

TEST_F(EvalTest, MotionTriggersRefresh) {
  auto actions = evaluate(ThingChange{"sensor_1", "off", "on"}, rules, items);
  ASSERT_EQ(actions.size(), 1u);
  EXPECT_EQ(actions[0], Action(SendCommand{"ssiot_object_detection", "REFRESH"}));
  EXPECT_TRUE(evaluate(ThingChange{"sensor_1", "on", "off"}, rules, items).empty());
  EXPECT_TRUE(evaluate(ThingChange{"sensor_2", "off", "on"}, rules, items).empty());
}

TEST_F(EvalTest, PersonThresholdIsStrict) {
  auto fire = evaluate(ItemUpdate{"ssiot_object_detection", ResultFields{"person", 0.9}}, rules, items, at_ms(5));
  ASSERT_EQ(fire.size(), 1u);
  EXPECT_EQ(fire[0], Action(SendNotification{"detected a person"}));
  EXPECT_TRUE(evaluate(ItemUpdate{"ssiot_object_detection", ResultFields{"person", 0.80}}, rules, items).empty());
  EXPECT_TRUE(evaluate(ItemUpdate{"ssiot_object_detection", ResultFields{"cat", 0.99}}, rules, items).empty());
  EXPECT_TRUE(evaluate(ItemUpdate{"ssiot_object_detection", std::nullopt}, rules, items).empty());
  EXPECT_EQ(items.get("ssiot_object_detection")->updates, 4u);
  EXPECT_EQ(items.get("ssiot_object_detection")->last_updated, at_ms(0));
}

TEST_F(EvalTest, UnknownItemIsAnError) {
  EXPECT_THROW(evaluate(ItemUpdate{"nope", ResultFields{"person", 1.0}}, rules, items), UnknownItem);
}

TEST_F(EvalTest, RulesFireInFileOrderAndDeterministically) {
  auto rs = parse_rules(R"(
rule "a" when Item "ssiot_object_detection" received update then sendNotification("1") end
rule "b" when Item "other" received update then sendNotification("x") end
rule "c" when Item "ssiot_object_detection" received update then
  if score > 0.1 { sendNotification("2") lamp.sendCommand("ON") }
end)");
  const Event ev = ItemUpdate{"ssiot_object_detection", ResultFields{"dog", 0.5}};
  auto a1 = evaluate(ev, rs, items);
  auto a2 = evaluate(ev, rs, items);
  EXPECT_EQ(a1, a2);
  ASSERT_EQ(a1.size(), 3u);
  EXPECT_EQ(a1[0], Action(SendNotification{"1"}));
  EXPECT_EQ(a1[1], Action(SendNotification{"2"}));
  EXPECT_EQ(a1[2], Action(SendCommand{"lamp", "ON"}));
}

struct RecordingTarget : ActionTarget {
  std::vector<std::pair<std::string, std::string>> commands;
  void submit_command(const std::string& item, const std::string& command, SimTime) override {
    if (item != "ssiot_object_detection") throw UnknownBinding("no binding for " + item);
    commands.emplace_back(item, command);
  }
};

TEST_F(EvalTest, DispatchRoutesActions) {
  auto dir = std::filesystem::temp_directory_path() / ("ssiot-rules-" + std::to_string(::getpid()));
  const auto path = (dir / "notify.jsonl").string();
  NotificationSink sink(path);
  RecordingTarget target;
  RuleEngine engine(rules, items, sink, &target);

  engine.on_event(ThingChange{"sensor_1", "off", "on"}, at_ms(1));
  ASSERT_EQ(target.commands.size(), 1u);
  EXPECT_EQ(target.commands[0].second, "REFRESH");

  engine.on_event(ItemUpdate{"ssiot_object_detection", ResultFields{"person", 0.95}}, at_ms(2));
  EXPECT_EQ(sink.size(), 1u);

  engine.dispatch(SendCommand{"unbound_item", "REFRESH"}, at_ms(3));
  EXPECT_EQ(engine.dispatch_errors(), 1u);
  EXPECT_EQ(target.commands.size(), 1u);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["text"], "detected a person");
  EXPECT_DOUBLE_EQ(j["at_ms"].get<double>(), 2.0);
  std::filesystem::remove_all(dir);
}

TEST(NotificationSinkTest, WebhookReceivesJson) {
  httplib::Server server;
  std::vector<std::string> bodies;
  std::mutex mu;
  server.Post("/hook", [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu);
    bodies.push_back(req.body);
    res.status = 204;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  NotificationSink sink({}, "http://127.0.0.1:" + std::to_string(port) + "/hook");
  sink.notify("detected a person", at_ms(10));
  server.stop();
  th.join();
  ASSERT_EQ(bodies.size(), 1u);
  EXPECT_EQ(nlohmann::json::parse(bodies[0])["text"], "detected a person");
  EXPECT_EQ(sink.webhook_failures(), 0u);

  NotificationSink dead({}, "http://127.0.0.1:1/hook");
  dead.notify("x", at_ms(0));
  EXPECT_EQ(dead.webhook_failures(), 1u);
  EXPECT_EQ(dead.size(), 1u);
}

}  // namespace
}  // namespace ssiot::rules
