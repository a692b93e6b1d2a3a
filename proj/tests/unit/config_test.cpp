#include "efcn/config.hpp"

#include "test_util.hpp"

namespace efcn {
namespace {

using test::set_of;

TEST(RunConfig, Defaults) {
  const RunConfig c = parse_run_config(R"({"classes": ["bg", "a", "b"]})");
  EXPECT_EQ(c.frame().size(), 3u);
  EXPECT_EQ(c.prototype_count(), 15u);
  EXPECT_EQ(c.architecture, Architecture::toy());
  EXPECT_EQ(c.acts, ActPolicy::SoftLabels);
  EXPECT_DOUBLE_EQ(c.gamma, 0.8);
  const auto grid = c.gamma_grid();
  ASSERT_EQ(grid.size(), 11u);
  EXPECT_DOUBLE_EQ(grid.front(), 0.5);
  EXPECT_NEAR(grid.back(), 1.0, 1e-12);
}

TEST(RunConfig, FullDocument) {
  const RunConfig c = parse_run_config(R"({
    "classes": ["bg", "a", "b", "c"],
    "architecture": "toy_skip",
    "features": 8,
    "prototypes": 7,
    "acts": ["a+b", "Omega"],
    "gamma": 0.9,
    "training": {"learning_rate": 0.02, "epochs": 3, "batch_size": 2, "seed": 5, "optimizer": "sgd"},
    "metrics": {"bins": 5, "gamma_grid": [0.5, 0.75]},
    "synthetic": {"train": 10, "test": 3, "boundary_width": 0, "noise": 0.1, "unknown_in_test": true},
    "seed": 9
  })");
  EXPECT_EQ(c.architecture, Architecture::toy_skip(3, 8));
  EXPECT_EQ(c.prototype_count(), 7u);
  EXPECT_EQ(c.acts, ActPolicy::Explicit);
  EXPECT_EQ(c.explicit_acts, (std::vector<ClassSet>{set_of({1, 2}), set_of({0, 1, 2, 3})}));
  EXPECT_EQ(c.training.optimizer, Optimizer::Sgd);
  EXPECT_EQ(c.training.epochs, 3u);
  EXPECT_EQ(c.metrics.bins, 5u);
  EXPECT_EQ(c.gamma_grid(), (std::vector<double>{0.5, 0.75}));
  EXPECT_TRUE(c.synthetic.unknown_in_test);
  EXPECT_EQ(c.synthetic.train, 10u);
  const ActList acts = resolve_acts(c, c.frame(), {});
  EXPECT_EQ(acts.size(), 6u);
  // Serialization is faithful.
  const RunConfig back = parse_run_config(run_config_to_json(c));
  EXPECT_EQ(back.architecture, c.architecture);
  EXPECT_EQ(back.explicit_acts, c.explicit_acts);
  EXPECT_EQ(back.synthetic.noise, c.synthetic.noise);
  EXPECT_EQ(back.training.learning_rate, c.training.learning_rate);
  EXPECT_EQ(run_config_to_json(back), run_config_to_json(c));
}

TEST(RunConfig, UnknownKeysRejectedAtEveryLevel) {
  EXPECT_EFCN_ERROR(parse_run_config(R"({"classes": ["a", "b"], "extra": 1})"), Config);
  EXPECT_EFCN_ERROR(parse_run_config(R"({"classes": ["a", "b"], "training": {"lr": 1}})"), Config);
  EXPECT_EFCN_ERROR(parse_run_config(R"({"classes": ["a", "b"], "metrics": {"Q": 1}})"), Config);
  EXPECT_EFCN_ERROR(parse_run_config(R"({"classes": ["a", "b"], "synthetic": {"size": 1}})"), Config);
  EXPECT_EFCN_ERROR(parse_run_config(
                        R"({"classes": ["a", "b"], "architecture": {"layers": [{"kind": "conv", "pad": 1}]}})"),
                    Config);
}

TEST(RunConfig, InvalidValuesRejected) {
  EXPECT_EFCN_ERROR(parse_run_config(R"({"classes": ["a", "b"], "gamma": 0.3})"), Config);
  EXPECT_EFCN_ERROR(parse_run_config(R"({"classes": ["a", "b"], "architecture": "huge"})"), Config);
  EXPECT_EFCN_ERROR(parse_run_config(R"({"classes": ["a", "b"], "training": {"epochs": -1}})"), Config);
  EXPECT_EFCN_ERROR(parse_run_config(R"({"classes": ["a", "b"], "synthetic": {"height": 30}})"), Config);
  EXPECT_EFCN_ERROR(parse_run_config(R"({"classes": ["a", "b"], "acts": ["a+z"]})"), Config);
  EXPECT_ANY_THROW(parse_run_config(R"({"classes": ["a"]})"));
  EXPECT_EFCN_ERROR(parse_run_config("{not json"), Config);
  EXPECT_EFCN_ERROR(load_run_config("/nonexistent/x.json"), Io);
}

TEST(RunConfig, CustomUtilityMatrix) {
  const RunConfig c =
      parse_run_config(R"({"classes": ["a", "b"], "utility_matrix": [[1, 0.2], [0, 1]]})");
  const UtilityTable t = make_table(c, c.frame(), build_act_list(c.frame(), {}), 0.8);
  EXPECT_DOUBLE_EQ(t.base()(0, 1), 0.2);
  EXPECT_EFCN_ERROR(parse_run_config(R"({"classes": ["a", "b"], "utility_matrix": [[1, 0]]})"), Config);
}

TEST(Architecture, JsonRoundTrip) {
  for (const Architecture& a : {Architecture::toy(), Architecture::toy_skip(2, 5)})
    EXPECT_EQ(architecture_from_json(architecture_to_json(a)), a);
}

TEST(ClassSetText, ParseAndFormat) {
  const Frame f({"sky", "road", "car"});
  EXPECT_EQ(parse_class_set(f, "Omega"), f.omega());
  EXPECT_EQ(parse_class_set(f, "car+sky"), set_of({0, 2}));
  EXPECT_EQ(format_class_set(f, set_of({0, 2})), "sky+car");
  for (std::uint64_t bits = 1; bits < 8; ++bits)
    EXPECT_EQ(parse_class_set(f, format_class_set(f, ClassSet(bits))), ClassSet(bits));
  EXPECT_EFCN_ERROR(parse_class_set(f, "tree"), InvalidLabel);
}

}  // namespace
}  // namespace efcn
