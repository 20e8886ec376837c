// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include <gtest/gtest.h>

#include <map>

#include "splicelb/splice/routes.hpp"

namespace splicelb {
namespace {

RouteConfig sample() {
  RouteConfig c;
  c.pools = {{"web", {{make_addr(10, 0, 2, 1), 8080, 1}, {make_addr(10, 0, 2, 2), 8080, 1}, {make_addr(10, 0, 2, 3), 8080, 2}}},
             {"api", {{make_addr(10, 0, 3, 1), 8080, 1}}},
             {"api2", {{make_addr(10, 0, 3, 2), 8080, 1}}}};
  c.default_pool = "web";
  c.default_edits = {{"X-Forwarded-For", "${client_addr}"}};
  c.rules = {{"/api", "api", {{"X-Tier", "api"}}},
             {"/api/v2/", "api2", {}},
             {"/api", "api2", {}}};
  return c;
}

TEST(Routes, LongestPrefixWins) {
  const RouteConfig c = sample();
  EXPECT_EQ(match_route(c, "/api/v2/users").pool->name, "api2");
  EXPECT_EQ(match_route(c, "/api/v2/users").rule_index, 1);
  EXPECT_EQ(match_route(c, "/api/v1").pool->name, "api");
}

TEST(Routes, EqualLengthPrefersEarlierRule) { EXPECT_EQ(match_route(sample(), "/apix").rule_index, 0); }

TEST(Routes, NoMatchFallsToDefault) {
  const RouteConfig c = sample();
  const RouteMatch m = match_route(c, "/index.html");
  EXPECT_EQ(m.rule_index, -1);
  EXPECT_EQ(m.pool->name, "web");
  EXPECT_EQ(m.edits, &c.default_edits);
}

TEST(Routes, RendersEditsWithClientAddress) {
  const std::vector<HeaderEdit> edits{{"X-Forwarded-For", "${client_addr}"}, {"X-Pair", "${client_addr},${client_addr}"}};
  EXPECT_EQ(render_edits(edits, make_addr(10, 0, 0, 7)),
            "X-Forwarded-For: 10.0.0.7\r\nX-Pair: 10.0.0.7,10.0.0.7\r\n");
  EXPECT_EQ(render_edits({}, 0), "");
}

TEST(Routes, ValidationCatchesBadReferences) {
  RouteConfig c = sample();
  EXPECT_NO_THROW(c.validate());
  c.rules.push_back({"/x", "missing", {}});
  EXPECT_THROW(c.validate(), ConfigError);
  c = sample();
  c.default_pool = "";
  EXPECT_THROW(c.validate(), ConfigError);
  c = sample();
  c.pools[1].members.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c = sample();
  c.pools[0].members[0].weight = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Routes, WeightedRoundRobinFollowsWeights) {
  const RouteConfig c = sample();
  BackendSelector sel(c, 7);
  std::map<Addr, int> counts;
  for (int i = 0; i < 400; ++i) ++counts[sel.next(c.pool("web")).addr];
  EXPECT_EQ(counts[make_addr(10, 0, 2, 1)], 100);
  EXPECT_EQ(counts[make_addr(10, 0, 2, 2)], 100);
  EXPECT_EQ(counts[make_addr(10, 0, 2, 3)], 200);

  BackendSelector a(c, 9), b(c, 9);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.next(c.pool("web")), b.next(c.pool("web")));
}

}  // namespace
}  // namespace splicelb
