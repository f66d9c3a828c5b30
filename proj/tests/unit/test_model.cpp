#include <gtest/gtest.h>

#include <cmath>

#include "focus/aggregator.hpp"
#include "focus/errors.hpp"
#include "focus/model.hpp"
#include "oracles.hpp"

using namespace focus;

namespace {

RunConfig small_config(AblationFlags flags = {}) {
  RunConfig c;
  c.heads = 2;
  c.t2 = 2;
  c.w = 4;
  c.ablation = flags;
  return c;
}

FeatureBag random_bag(std::size_t n, std::size_t d, std::uint64_t seed) {
  CounterRng rng(seed);
  FeatureBag b = oracle::clustered_bag(n, d, rng);
  b.label = 1;
  return b;
}

}  // namespace

TEST(Model, ParameterSetsPerVariant) {
  CounterRng rng(1);
  const Matrix knowledge = oracle::gaussian(3, 8, rng);
  const auto variants = cumulative_variants();

  const FocusModel base(small_config(variants[0].flags), knowledge, 3, 0);
  EXPECT_EQ(base.params().names(),
            (std::vector<std::string>{"cls.b", "cls.w", "pool.u", "pool.v", "pool.w"}));

  const FocusModel prompt(small_config(variants[1].flags), knowledge, 3, 0);
  EXPECT_TRUE(prompt.params().contains(param::kTextProj));
  EXPECT_TRUE(prompt.params().at(param::kLearnablePrompts).requires_grad);
  EXPECT_FALSE(prompt.params().contains(param::kProjQ));

  const FocusModel kavtc(small_config(variants[2].flags), knowledge, 3, 0);
  EXPECT_FALSE(kavtc.params().at(param::kProjQ).requires_grad);

  const FocusModel full(small_config(), knowledge, 3, 0);
  EXPECT_TRUE(full.params().at(param::kProjQ).requires_grad);
  EXPECT_TRUE(full.params().contains(param::head_v(1)));
  EXPECT_FALSE(full.params().contains(param::kPoolV));
  EXPECT_EQ(full.params().value(param::kProjQ), Matrix::identity(8));
}

TEST(Model, BaseMilNeverReadsPrompts) {
  CounterRng rng(2);
  const RunConfig c = small_config(cumulative_variants()[0].flags);
  const FeatureBag bag = random_bag(30, 8, 3);
  const FocusModel a(c, oracle::gaussian(3, 8, rng), 3, 5);
  const FocusModel b(c, oracle::gaussian(3, 8, rng), 3, 5);
  EXPECT_EQ(a.forward(bag).logits, b.forward(bag).logits);
  for (const auto& rec : a.forward(bag).trace.stage_records) EXPECT_TRUE(rec.bypassed);
}

TEST(Model, ForwardPipelineMatchesModel) {
  CounterRng rng(3);
  const FeatureBag bag = random_bag(40, 8, 4);
  for (const auto& v : cumulative_variants()) {
    const FocusModel m(small_config(v.flags), oracle::gaussian(3, 8, rng), 3, 6);
    const auto a = m.forward(bag);
    const auto b = forward_pipeline(bag, m.prompt_set(), m.params(), m.config());
    EXPECT_EQ(a.logits, b.logits) << v.name;
    EXPECT_EQ(a.trace.to_json(), b.trace.to_json()) << v.name;
  }
}

TEST(Model, TraceIsASubsetChain) {
  CounterRng rng(4);
  const FocusModel m(small_config(), oracle::gaussian(3, 8, rng), 3, 1);
  const auto out = m.forward(random_bag(64, 8, 9));
  EXPECT_NO_THROW(out.trace.check_subset_chain());
  ASSERT_EQ(out.trace.stage_records.size(), 5u);
  EXPECT_EQ(out.trace.stage_records[0].stage_name, "redundancy");
  EXPECT_EQ(out.trace.stage_records[1].stage_name, "prioritize");
  EXPECT_EQ(out.trace.stage_records[4].stage_name, "svtc.2");
  EXPECT_LE(out.trace.overall_ratio(), 0.8 + 1e-12);
}

TEST(Model, InitialLossNearLogS) {
  for (const auto& v : cumulative_variants()) {
    CounterRng rng(5);
    RunConfig c = small_config(v.flags);
    const std::size_t d = 16;
    Matrix knowledge = oracle::gaussian(5, d, rng);
    for (auto& x : knowledge.values()) x *= 0.1;
    const FocusModel m(c, knowledge, 5, 7);
    const PreparedBag prepared = m.prepare(random_bag(50, d, 8));
    EXPECT_NEAR(m.loss(prepared, 2), std::log(5.0), 0.1 * std::log(5.0)) << v.name;
  }
}

TEST(Model, GradientCheckEveryVariant) {
  for (const auto& v : cumulative_variants()) {
    CounterRng rng(6);
    FocusModel m(small_config(v.flags), oracle::gaussian(3, 8, rng), 3, 11);
    for (auto& [name, t] : m.params().entries()) {
      if (name.rfind("head.", 0) == 0) t.value *= 20.0;
    }
    const auto report = check_model_gradients(m, random_bag(8, 8, 12), 1);
    EXPECT_TRUE(report.passed) << v.name << "\n" << report.summary();
    EXPECT_FALSE(report.checked_tensors.empty());
  }
}

TEST(Model, RejectsMismatchedInputs) {
  CounterRng rng(7);
  const FocusModel m(small_config(), oracle::gaussian(3, 8, rng), 3, 1);
  EXPECT_THROW(m.forward(random_bag(10, 6, 1)), ShapeMismatch);
  EXPECT_THROW(FocusModel(small_config(), oracle::gaussian(3, 7, rng), 3, 1), ConfigError);
  EXPECT_THROW(FocusModel(small_config(cumulative_variants()[1].flags),
                          oracle::gaussian(2, 8, rng), 3, 1),
               ConfigError);
}

TEST(Model, WrapsExistingParameters) {
  CounterRng rng(8);
  const Matrix k = oracle::gaussian(3, 8, rng);
  const FocusModel a(small_config(), k, 3, 1);
  const FocusModel b(small_config(), k, 3, a.params());
  const FeatureBag bag = random_bag(20, 8, 2);
  EXPECT_EQ(a.forward(bag).logits, b.forward(bag).logits);
  ParamStore extra = a.params();
  extra.add("bogus", Matrix(1, 1));
  EXPECT_THROW(FocusModel(small_config(), k, 3, extra), ConfigError);
}

TEST(Model, PromptHeadWithIdentityProjection) {
  const Matrix knowledge = Matrix::from_rows({{1, 0}, {0, 1}});
  const Matrix text = class_text_features(knowledge, nullptr);
  EXPECT_EQ(text, knowledge);
  ParamStore p;
  p.add(param::kTextProj, Matrix::identity(2));
  p.add(param::kClsB, Matrix::from_rows({{0.0, 1.0}}));
  const auto logits = prompt_head(std::vector<double>{2.0, 3.0}, text, p);
  EXPECT_DOUBLE_EQ(logits[0], 2.0);
  EXPECT_DOUBLE_EQ(logits[1], 4.0);
  const Matrix learn = Matrix::from_rows({{1, 1}, {3, 1}});
  const Matrix shifted = class_text_features(knowledge, &learn);
  EXPECT_DOUBLE_EQ(shifted(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(shifted(1, 1), 2.0);
}
