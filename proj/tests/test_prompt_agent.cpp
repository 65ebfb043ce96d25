#include "doctest.h"

#include <random>

#include "augagent/errors.hpp"
#include "augagent/prompt_agent.hpp"
#include "support/fixtures.hpp"

using namespace augagent;

namespace {

std::size_t occurrences(const std::string& hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("render_initial_command substitutes the category") {
  PromptTemplates t;
  t.p_gen = "Give one background scene for a {category} photo";
  CHECK(render_initial_command(t, {1, "airplane"}) == "Give one background scene for a airplane photo");
  CHECK(render_initial_command(t, {11, "dining table"}) ==
        "Give one background scene for a dining table photo");
  t.p_gen = "no placeholder";
  CHECK_THROWS_AS(render_initial_command(t, {1, "airplane"}), DataError);
}

TEST_CASE("render_refine_command") {
  PromptTemplates t;
  t.p_refine = "Rate {candidate} for {category}.";
  const auto out = render_refine_command(t, {8, "cat"}, "on a sunny windowsill");
  CHECK(out.starts_with("Rate on a sunny windowsill for cat."));
  CHECK(occurrences(out, kScoreFormatSuffix) == 1);
  CHECK_THROWS_AS(render_refine_command(t, {8, "cat"}, ""), DataError);

  // A candidate that itself contains the placeholder text is not re-expanded.
  const auto odd = render_refine_command(t, {8, "cat"}, "{category} everywhere");
  CHECK(odd.starts_with("Rate {category} everywhere for cat."));

  // Default templates also carry the suffix once.
  CHECK(occurrences(render_refine_command(PromptTemplates{}, {8, "cat"}, "x"), kScoreFormatSuffix) == 1);
}

TEST_CASE("parse_score") {
  CHECK(parse_score("{\"score\": 0.92}") == doctest::Approx(0.92).epsilon(1e-15));
  CHECK(parse_score("Sure! {\"score\": 0.5} because the scene fits") == 0.5);
  CHECK(parse_score("{\"score\":1}") == 1.0);
  CHECK_THROWS_AS(parse_score("{\"score\": 1.7}"), DataError);
  CHECK_THROWS_AS(parse_score("{\"score\": -0.1}"), DataError);
  CHECK_THROWS_AS(parse_score("no json here"), DataError);
  CHECK_THROWS_AS(parse_score("{\"rating\": 0.5}"), DataError);
}

TEST_CASE("self_refine accepts the second candidate") {
  auto llm = fixture::ScriptedLlm::scores({0.50, 0.95});
  const auto r = self_refine(llm, {}, {8, "cat"}, {0.9, 8, 0});
  CHECK(r.text == "candidate 2");
  CHECK(r.iterations == 2);
  CHECK_FALSE(r.best_effort);
  CHECK(r.score == doctest::Approx(0.95));
  CHECK(llm.generate_calls == 2);
  CHECK(llm.score_calls == 2);
}

TEST_CASE("self_refine accepts the first candidate") {
  auto llm = fixture::ScriptedLlm::scores({0.95});
  const auto r = self_refine(llm, {}, {8, "cat"}, {0.9, 8, 0});
  CHECK(r.text == "candidate 1");
  CHECK(r.iterations == 1);
  CHECK_FALSE(r.best_effort);
}

TEST_CASE("self_refine returns the best candidate when exhausted") {
  auto llm = fixture::ScriptedLlm::scores({0.3, 0.4, 0.2});
  const auto r = self_refine(llm, {}, {8, "cat"}, {0.9, 3, 0});
  CHECK(r.best_effort);
  CHECK(r.text == "candidate 2");
  CHECK(r.score == doctest::Approx(0.4));
  CHECK(r.iterations == 3);
  REQUIRE(r.history.size() == 3);
  CHECK(*r.history[0].score == doctest::Approx(0.3));
  CHECK(*r.history[2].score == doctest::Approx(0.2));
}

TEST_CASE("unparseable score replies are recorded and skipped") {
  fixture::ScriptedLlm llm({"garbage", "{\"score\": 0.91}"});
  const auto r = self_refine(llm, {}, {8, "cat"}, {0.9, 5, 0});
  CHECK(r.iterations == 2);
  CHECK_FALSE(r.history[0].score.has_value());
  CHECK(r.text == "candidate 2");

  fixture::ScriptedLlm never({"nope"});
  CHECK_THROWS_AS(self_refine(never, {}, {8, "cat"}, {0.9, 3, 0}), BackendError);
}

TEST_CASE("self_refine properties over random score scripts") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> script;
    const int len = 1 + static_cast<int>(rng() % 10);
    for (int i = 0; i < len; ++i) script.push_back(std::round(u(rng) * 1e6) / 1e6);
    const int max_iters = 1 + static_cast<int>(rng() % 8);
    const double eps = 0.5 + 0.5 * u(rng);
    auto llm = fixture::ScriptedLlm::scores(script);
    const auto r = self_refine(llm, {}, {3, "bird"}, {eps, max_iters, rng()});

    CHECK(r.iterations == static_cast<int>(r.history.size()));
    CHECK(r.iterations <= max_iters);
    CHECK(llm.generate_calls == r.iterations);
    CHECK(llm.score_calls == r.iterations);
    if (!r.best_effort) CHECK(r.score >= eps);
    for (int i = 0; i < r.iterations; ++i) {
      CHECK(*r.history[i].score == doctest::Approx(script[i % script.size()]).epsilon(1e-12));
    }
    // Acceptance happens at the first score >= eps, never later.
    for (int i = 0; i + 1 < r.iterations; ++i) CHECK(*r.history[i].score < eps);
  }
}

TEST_CASE("MockLlm is deterministic in instruction and seed") {
  MockLlm llm;
  const ClassLabel cat{8, "cat"};
  const auto a = self_refine(llm, {}, cat, {0.9, 8, 17});
  const auto b = self_refine(llm, {}, cat, {0.9, 8, 17});
  CHECK(a.text == b.text);
  CHECK(a.score == b.score);
  CHECK(a.iterations == b.iterations);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].candidate == b.history[i].candidate);
    CHECK(a.history[i].score == b.history[i].score);
  }
  const auto reply = llm.complete(render_refine_command({}, cat, "x"), 5);
  const double s = parse_score(reply);
  CHECK(s >= 0.5);
  CHECK(s < 1.0);
}
