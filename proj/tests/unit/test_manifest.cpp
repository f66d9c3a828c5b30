#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "focus/errors.hpp"
#include "focus/manifest.hpp"

using namespace focus;

namespace {

DatasetManifest make(std::vector<std::size_t> per_class) {
  DatasetManifest m;
  m.d = 8;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    m.class_names.push_back("c" + std::to_string(c));
    for (std::size_t b = 0; b < per_class[c]; ++b) {
      m.bags.push_back({"c" + std::to_string(c) + "_" + std::to_string(b) + ".fbag",
                        static_cast<int>(c), Split::Train});
    }
  }
  return m;
}

}  // namespace

TEST(Manifest, JsonRoundTrip) {
  DatasetManifest m = make({3, 2});
  m.prompts = "prompts.fbag";
  m.bags[1].split = Split::Val;
  const auto back = DatasetManifest::from_json(m.to_json(), "/tmp");
  EXPECT_EQ(back.to_json(), m.to_json());
  EXPECT_EQ(back.base_dir, "/tmp");
  EXPECT_EQ(back.resolve("a.fbag"), std::filesystem::path("/tmp/a.fbag"));
}

TEST(Manifest, ValidateRejectsBadLabels) {
  DatasetManifest m = make({2, 2});
  m.bags[0].label = 5;
  EXPECT_THROW(m.validate(), Error);
}

TEST(Manifest, FoldProportionsPerClass) {
  for (std::size_t n : {5u, 7u, 10u, 23u, 40u}) {
    const DatasetManifest m = make({n, n + 3});
    const DatasetManifest f = make_fold(m, 0, 1);
    for (int c = 0; c < 2; ++c) {
      const double total = static_cast<double>(f.indices(Split::Train, c).size() +
                                               f.indices(Split::Val, c).size() +
                                               f.indices(Split::Test, c).size());
      EXPECT_LT(std::abs(f.indices(Split::Val, c).size() - 0.2 * total), 1.0);
      EXPECT_LT(std::abs(f.indices(Split::Test, c).size() - 0.2 * total), 1.0);
      // Floor rounding of both holdouts can push train up to 1.6 bags over 60%.
      EXPECT_LT(std::abs(f.indices(Split::Train, c).size() - 0.6 * total), 2.0);
    }
  }
}

TEST(Manifest, FoldsAreDeterministicAndDiffer) {
  const DatasetManifest m = make({20, 20});
  EXPECT_EQ(make_fold(m, 3, 9).to_json(), make_fold(m, 3, 9).to_json());
  EXPECT_NE(make_fold(m, 3, 9).to_json(), make_fold(m, 4, 9).to_json());
  EXPECT_EQ(make_folds(m, 4, 9).size(), 4u);
  EXPECT_THROW(make_folds(m, 1, 9), ConfigError);
}

TEST(Manifest, KShotSamplingIsDisjointAndDeterministic) {
  const DatasetManifest m = make({10, 10, 10});
  const auto a = sample_k_shot(m, 4, 7);
  EXPECT_EQ(a, sample_k_shot(m, 4, 7));
  ASSERT_EQ(a.size(), 12u);
  EXPECT_EQ(std::set<std::string>(a.begin(), a.end()).size(), 12u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].substr(0, 2), "c" + std::to_string(i / 4));
  }
}

TEST(Manifest, KShotTooFewBags) {
  const DatasetManifest m = make({3, 10});
  try {
    sample_k_shot(m, 4, 0);
    FAIL();
  } catch (const InsufficientShots& e) {
    EXPECT_EQ(e.class_id(), 0);
    EXPECT_EQ(e.available(), 3u);
  }
}
