#include <doctest.h>

#include <cmath>
#include <random>

#include "bdt/errors.hpp"
#include "bdt/tree.hpp"
#include "support.hpp"

using namespace bdt;
using bdt::test::continuous_schema;
using bdt::test::make_data;

TEST_SUITE("tree") {

TEST_CASE("leaf marginal matches Beta arithmetic") {
  CHECK(std::abs(leaf_log_marginal({0, 0}, 1.0)) < 1e-15);
  CHECK(std::abs(leaf_log_marginal({2, 0}, 1.0) - std::log(1.0 / 3.0)) < 1e-12);
  CHECK(std::abs(leaf_log_marginal({1, 1}, 1.0) - std::log(1.0 / 6.0)) < 1e-12);

  for (long alpha : {1L, 2L, 3L})
    for (std::size_t n0 = 0; n0 <= 40; n0 += 3)
      for (std::size_t n1 = 0; n1 <= 40; n1 += 5) {
        const double want = bdt::test::oracle_leaf_marginal(n0, n1, alpha);
        CHECK(std::abs(leaf_log_marginal({n0, n1}, static_cast<double>(alpha)) - want) <
              1e-9 * std::max(1.0, std::abs(want)));
      }
}

TEST_CASE("class-separating split never lowers the marginal") {
  for (std::size_t a = 0; a <= 25; ++a)
    for (std::size_t b = 0; b <= 25; ++b) {
      const double parent = leaf_log_marginal({a, b}, 1.0);
      const double split = leaf_log_marginal({a, 0}, 1.0) + leaf_log_marginal({0, b}, 1.0);
      CHECK(split >= parent - 1e-12);
    }
}

TEST_CASE("splitting a pure leaf costs one extra leaf") {
  // (2,0) -> (1,0) + (1,0): log(1/4) < log(1/3)
  const double parent = leaf_log_marginal({2, 0}, 1.0);
  const double split = 2 * leaf_log_marginal({1, 0}, 1.0);
  CHECK(split < parent);
  CHECK(std::abs(split - std::log(0.25)) < 1e-12);
}

TEST_CASE("leaf predictive") {
  TreePrior prior;
  auto p = leaf_predictive({0, 0}, prior);
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.5);
  p = leaf_predictive({236, 80}, prior);
  CHECK(std::abs(p[0] - 237.0 / 318.0) < 1e-15);
  CHECK(std::abs(p[1] - 81.0 / 318.0) < 1e-15);

  double last = 0.0;
  for (std::size_t n = 0; n < 2000; n += 7) {
    auto q = leaf_predictive({n, 0}, prior);
    CHECK(q[0] > last);
    CHECK(q[0] < 1.0);
    CHECK(std::abs(q[0] + q[1] - 1.0) < 1e-15);
    last = q[0];
  }
}

TEST_CASE("candidate rules") {
  Schema schema({{"c", VariableKind::continuous, {}},
                 {"b", VariableKind::categorical, {0, 1}},
                 {"k", VariableKind::continuous, {}},
                 {"t", VariableKind::categorical, {0, 1, 2, 3}}},
                "y");
  auto data = make_data(schema,
                        {{3.4, 0, 2, 0}, {1.2, 1, 2, 2}, {5.0, 1, 2, 3}, {3.4, 0, 2, 0}},
                        {0, 1, 0, 1});
  auto cont = candidate_rules(data, 0);
  REQUIRE(cont.size() == 2);
  CHECK(cont[0] == SplitRule::at_threshold(0, 1.2));
  CHECK(cont[1] == SplitRule::at_threshold(0, 3.4));

  auto binary = candidate_rules(data, 1);
  REQUIRE(binary.size() == 1);
  CHECK(binary[0] == SplitRule::at_level(1, 0));

  CHECK(candidate_rules(data, 2).empty());

  // level 1 is declared but absent
  auto cat = candidate_rules(data, 3);
  REQUIRE(cat.size() == 3);
  CHECK(cat[0].level == 0);
  CHECK(cat[1].level == 2);
  CHECK(cat[2].level == 3);
}

TEST_CASE("continuous candidates leave both sides nonempty") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> v(0, 9);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    rows.push_back({static_cast<double>(v(rng))});
    labels.push_back(i % 2);
  }
  auto data = make_data(continuous_schema(1), rows, labels);
  for (const auto& rule : candidate_rules(data, 0)) {
    int left = 0;
    for (std::size_t i = 0; i < data.rows(); ++i) left += rule.goes_left(data.at(i, 0));
    CHECK(left > 0);
    CHECK(left < 40);
  }
}

TEST_CASE("routing a categorical stump") {
  auto tree = DecisionTree().with_birth(0, SplitRule::at_level(5, 3));
  std::vector<double> x(16, 0.0);
  CHECK(route(DecisionTree(), x) == 0);
  x[5] = 3;
  CHECK(route(tree, x) == tree.node(0).split().left);
  x[5] = 4;
  CHECK(route(tree, x) == tree.node(0).split().right);
  CHECK_THROWS_AS(route(tree, std::vector<double>(5, 0.0)), ValidationError);
}

TEST_CASE("routing a depth-3 tree matches a hand trace") {
  auto tree = DecisionTree()
                  .with_birth(0, SplitRule::at_threshold(0, 5))   // leaves 1, 2
                  .with_birth(1, SplitRule::at_threshold(1, 2))   // leaves 3, 4
                  .with_birth(2, SplitRule::at_threshold(1, 7))   // leaves 5, 6
                  .with_birth(3, SplitRule::at_threshold(0, 1));  // leaves 7, 8
  const std::vector<std::vector<double>> points = {{0, 0}, {3, 1}, {5, 2},   {2, 3},
                                                   {6, 7}, {9, 8}, {1, 2},   {5.5, 0}};
  const std::vector<NodeId> expected = {7, 8, 8, 4, 5, 6, 7, 5};
  for (std::size_t i = 0; i < points.size(); ++i) CHECK(route(tree, points[i]) == expected[i]);
}

TEST_CASE("annotate") {
  SUBCASE("single leaf holds every row") {
    std::vector<std::vector<double>> rows(316, {0.0});
    std::vector<int> labels(316, 0);
    for (int i = 0; i < 80; ++i) labels[i] = 1;
    auto data = make_data(continuous_schema(1), rows, labels);
    auto t = annotate(DecisionTree(), data);
    CHECK(t.node(0).leaf().counts == LeafCounts{236, 80});
  }
  SUBCASE("perfect stump on separable rows") {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) {
      rows.push_back({static_cast<double>(i)});
      labels.push_back(i < 5 ? 0 : 1);
    }
    auto data = make_data(continuous_schema(1), rows, labels);
    auto t = annotate(DecisionTree().with_birth(0, SplitRule::at_threshold(0, 4)), data);
    CHECK(t.node(1).leaf().counts == LeafCounts{5, 0});
    CHECK(t.node(2).leaf().counts == LeafCounts{0, 5});
  }
  SUBCASE("counts partition the rows of random trees") {
    std::mt19937_64 rng(11);
    auto data = synth_trauma(120, 5, {8});
    for (int rep = 0; rep < 50; ++rep) {
      auto t = bdt::test::random_tree(data, rep % 12, rng);
      const auto want = bdt::test::oracle_counts(t, data);
      LeafCounts total{0, 0};
      for (auto id : t.leaves()) {
        CHECK(t.node(id).leaf().counts == want[id]);
        total[0] += t.node(id).leaf().counts[0];
        total[1] += t.node(id).leaf().counts[1];
      }
      CHECK(total[0] == data.class_count(0));
      CHECK(total[1] == data.class_count(1));
      CHECK(t.leaf_count() == t.split_count() + 1);
    }
  }
}

TEST_CASE("marginal likelihood ignores node numbering") {
  auto data = synth_trauma(60, 2, {8});
  std::mt19937_64 rng(4);
  TreePrior prior;
  for (int rep = 0; rep < 20; ++rep) {
    auto t = bdt::test::random_tree(data, 1 + rep % 6, rng);
    // reverse the ids: node i becomes n-1-i
    const auto n = t.nodes().size();
    std::vector<TreeNode> nodes(n);
    for (const auto& node : t.nodes()) {
      TreeNode copy = node;
      copy.id = n - 1 - node.id;
      if (!copy.is_leaf()) {
        auto sp = copy.split();
        sp.left = n - 1 - sp.left;
        sp.right = n - 1 - sp.right;
        copy.body = sp;
      }
      nodes[copy.id] = copy;
    }
    DecisionTree renumbered(nodes, n - 1 - t.root(), true);
    CHECK(log_marginal_likelihood(renumbered, prior) ==
          doctest::Approx(log_marginal_likelihood(t, prior)).epsilon(1e-12));
    CHECK(bdt::test::canonical(renumbered) == bdt::test::canonical(t));
  }
  CHECK_THROWS_AS(log_marginal_likelihood(DecisionTree(), prior), ValidationError);
}

TEST_CASE("birth then death recovers the tree") {
  auto data = synth_trauma(80, 9, {8});
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 30; ++rep) {
    auto t = bdt::test::random_tree(data, rep % 8, rng);
    for (auto leaf : t.leaves()) {
      auto grown = t.with_birth(leaf, SplitRule::at_threshold(0, 40));
      auto back = annotate(grown, data).with_death(leaf);
      CHECK(back == t);
    }
  }
}

TEST_CASE("structural validation") {
  using N = std::vector<TreeNode>;
  CHECK_THROWS_AS(DecisionTree(N{{0, Split{{}, 1, 5}}, {1, Leaf{}}, {2, Leaf{}}}, 0, false),
                  ValidationError);
  CHECK_THROWS_AS(DecisionTree(N{{0, Split{{}, 1, 1}}, {1, Leaf{}}}, 0, false), ValidationError);
  CHECK_THROWS_AS(DecisionTree(N{{0, Split{{}, 1, 2}}, {1, Leaf{}}, {2, Leaf{}}, {3, Leaf{}}}, 0,
                               false),
                  ValidationError);
  CHECK_THROWS_AS(DecisionTree(N{{0, Split{{}, 1, 2}}, {1, Leaf{}}, {2, Split{{}, 0, 1}}}, 0,
                               false),
                  ValidationError);
  CHECK_THROWS_AS(DecisionTree(N{{0, Leaf{}}}, 3, false), ValidationError);
  CHECK_THROWS_AS(DecisionTree(N{{1, Leaf{}}}, 0, false), ValidationError);
}

TEST_CASE("serialization round trip") {
  auto data = synth_trauma(100, 3, {8});
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 40; ++rep) {
    auto t = bdt::test::random_tree(data, rep % 10, rng);
    const double ll = log_marginal_likelihood(t, TreePrior{});
    auto parsed = deserialize(serialize(t, ll));
    CHECK(parsed.tree == t);
    REQUIRE(parsed.loglik.has_value());
    CHECK(*parsed.loglik == ll);
    CHECK(serialize(parsed.tree, parsed.loglik) == serialize(t, ll));
  }
  CHECK(serialize(DecisionTree()) == R"({"nodes":[{"id":0,"leaf":[0,0]}],"root":0})");
}

TEST_CASE("malformed records are rejected with a position") {
  auto message = [](const std::string& line) {
    try {
      deserialize(line);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(R"({"nodes":[{"id":0,"split":{"var":0,"thr":1},"left":1,"right":7},)"
                R"({"id":1,"leaf":[0,0]}],"root":0})") != "");
  CHECK(message(R"({"nodes":[{"id":0,"leaf":[1]}],"root":0})").find("nodes[0].leaf") !=
        std::string::npos);
  CHECK(message(R"({"nodes":[{"id":0,"leaf":[1,2]},)").find("byte") != std::string::npos);
  CHECK(message(R"({"nodes":[{"id":0,"leaf":[1,2],"split":{"var":0,"thr":1}}],"root":0})")
            .find("nodes[0]") != std::string::npos);
}

}  // TEST_SUITE
