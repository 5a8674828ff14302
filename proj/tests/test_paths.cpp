#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "sigsde/paths/csv.hpp"
#include "sigsde/paths/transforms.hpp"
#include "test_util.hpp"

using namespace sigsde;

namespace {

Path p1(std::vector<double> t, std::vector<double> v) { return Path::from_values(TimeGrid(t), v); }

std::vector<double> column(const Path& p, std::size_t c) {
  std::vector<double> out;
  for (std::size_t i = 0; i < p.length(); ++i) out.push_back(p(i, c));
  return out;
}

}  // namespace

TEST(TimeGrid, RejectsBadGrids) {
  EXPECT_THROW(TimeGrid({0.0}), Error);
  EXPECT_THROW(TimeGrid({0.0, 0.0}), Error);
  EXPECT_THROW(TimeGrid({1.0, 0.5}), Error);
  EXPECT_THROW(TimeGrid({0.0, std::nan("")}), Error);
}

TEST(Path, RejectsNonFiniteAndNonMonotoneTime) {
  Matrix v(2, 1);
  v << 0, std::numeric_limits<double>::infinity();
  EXPECT_THROW(Path(TimeGrid({0, 1}), v), Error);
  Matrix w(2, 2);
  w << 1, 0, 0.5, 0;
  EXPECT_THROW(Path(TimeGrid({0, 1}), w, true), Error);
}

TEST(LinearInterpolate, Examples) {
  auto a = linear_interpolate(p1({0, 2}, {0, 4}), TimeGrid({0, 1, 2}));
  EXPECT_EQ(column(a, 0), (std::vector<double>{0, 2, 4}));

  auto b = linear_interpolate(p1({0, 1, 2}, {1, 3, 3}), TimeGrid({0.5, 1.5}));
  EXPECT_DOUBLE_EQ(b(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(b(1, 0), 3.0);

  EXPECT_THROW(linear_interpolate(p1({0, 1}, {0, 1}), TimeGrid({0, 1.5})), Error);
  try {
    linear_interpolate(p1({0, 1}, {0, 1}), TimeGrid({-1, 0.5}));
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::out_of_range);
  }
}

TEST(LinearInterpolate, OwnGridIsIdentityAndNodesExact) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Path p = test::gaussian_path(rng, 9, 3, 0.7);
    Path q = linear_interpolate(p, p.grid());
    EXPECT_EQ(q.values(), p.values());
    // Refining then restricting to the original nodes reproduces them.
    std::vector<double> fine;
    for (std::size_t i = 0; i + 1 < p.length(); ++i) {
      fine.push_back(p.grid()[i]);
      fine.push_back(0.3 * p.grid()[i] + 0.7 * p.grid()[i + 1]);
    }
    fine.push_back(p.grid().back());
    Path r = linear_interpolate(linear_interpolate(p, TimeGrid(fine)), p.grid());
    EXPECT_EQ(r.values(), p.values());
  }
}

TEST(TimeAugment, Examples) {
  Path p = p1({0, 1}, {5, 7});
  Path a = time_augment(p);
  ASSERT_EQ(a.channels(), 2u);
  EXPECT_TRUE(a.time_augmented());
  EXPECT_EQ(a(0, 0), 0);
  EXPECT_EQ(a(0, 1), 5);
  EXPECT_EQ(a(1, 0), 1);
  EXPECT_EQ(a(1, 1), 7);

  Path b = time_augment(p1({0, 0.5, 2}, {1, 2, 3}));
  EXPECT_EQ(column(b, 0), (std::vector<double>{0, 0.5, 2}));

  try {
    time_augment(a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_state);
  }
}

TEST(TranslateToZero, Examples) {
  EXPECT_EQ(column(translate_to_zero(p1({0, 1, 2}, {3, 4, 6})), 0), (std::vector<double>{0, 1, 3}));
  Path z = p1({0, 1, 2}, {0, 4, 6});
  EXPECT_EQ(translate_to_zero(z).values(), z.values());
  Path a = time_augment(p1({1, 2, 3}, {3, 4, 6}));
  Path t = translate_to_zero(a);
  EXPECT_EQ(column(t, 0), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(column(t, 1), (std::vector<double>{0, 1, 3}));
  EXPECT_EQ(translate_to_zero(t).values(), t.values());
}

TEST(TimeNormalize, Examples) {
  std::vector<double> v(64, 0.0);
  auto g = TimeGrid::stepped(0, 1, 64);
  Path a = time_normalize(time_augment(Path::from_values(g, v)));
  EXPECT_EQ(a(0, 0), 0.0);
  EXPECT_EQ(a(63, 0), 1.0);
  EXPECT_DOUBLE_EQ(a(1, 0), 1.0 / 63);

  Path b = time_normalize(time_augment(p1({10, 20, 40}, {1, 2, 3})));
  EXPECT_EQ(b(0, 0), 0);
  EXPECT_DOUBLE_EQ(b(1, 0), 1.0 / 3);
  EXPECT_EQ(b(2, 0), 1);
  EXPECT_EQ(column(b, 1), (std::vector<double>{1, 2, 3}));

  Path c = time_augment(p1({0, 0.25, 1}, {1, 2, 3}));
  EXPECT_EQ(time_normalize(c).values(), c.values());
  EXPECT_THROW(time_normalize(p1({0, 1}, {0, 1})), Error);
}

TEST(LeadLag, Examples) {
  Path a = lead_lag(p1({0, 1}, {4, 9}));
  ASSERT_EQ(a.length(), 3u);
  ASSERT_EQ(a.channels(), 2u);
  EXPECT_EQ(column(a, 0), (std::vector<double>{4, 9, 9}));
  EXPECT_EQ(column(a, 1), (std::vector<double>{4, 4, 9}));

  Path b = lead_lag(p1({0, 1, 2}, {1, 2, 3}));
  EXPECT_EQ(column(b, 0), (std::vector<double>{1, 2, 2, 3, 3}));
  EXPECT_EQ(column(b, 1), (std::vector<double>{1, 1, 2, 2, 3}));

  Path c = lead_lag(p1({0, 1, 2}, {5, 5, 5}));
  EXPECT_TRUE((c.values().array() == 5.0).all());
}

TEST(LeadLag, ShapeAndLeadProjectionRecoverInput) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Path p = test::gaussian_path(rng, 7, 2, 1.0);
    Path ll = lead_lag(p);
    ASSERT_EQ(ll.length(), 2 * p.length() - 1);
    ASSERT_EQ(ll.channels(), 2 * p.channels());
    std::vector<Eigen::RowVectorXd> rows;
    for (std::size_t i = 0; i < ll.length(); ++i) {
      Eigen::RowVectorXd r = ll.values().row(static_cast<Eigen::Index>(i)).head(2);
      if (rows.empty() || r != rows.back()) rows.push_back(r);
    }
    ASSERT_EQ(rows.size(), p.length());
    for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i], p.values().row(static_cast<Eigen::Index>(i)));
  }
}

TEST(Scale, Examples) {
  Path p = p1({0, 1}, {0, 0.01});
  EXPECT_EQ(scale(p, 1.0).values(), p.values());
  EXPECT_DOUBLE_EQ(scale(p, 100)(1, 0), 1.0);
  Path a = time_augment(p1({0, 1, 2}, {2, 3, 5}));
  EXPECT_EQ(translate_to_zero(scale(a, 3.0)).values(), scale(translate_to_zero(a), 3.0).values());
  EXPECT_EQ(scale(a, 3.0)(2, 0), 2.0);
  EXPECT_THROW(scale(p, 0.0), Error);
}

TEST(Standardize, Examples) {
  auto g = TimeGrid({0, 1});
  PathBatch b({p1({0, 1}, {0, 1}), p1({0, 1}, {0, 3})});
  auto s = fit_standardization(b);
  EXPECT_DOUBLE_EQ(s.mu_T(0), 2.0);
  EXPECT_DOUBLE_EQ(s.sigma_T(0), 1.0);

  PathBatch c({p1({0, 1}, {0, 2}), p1({0, 1}, {1, 2})});
  try {
    fit_standardization(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_data);
  }
}

TEST(Standardize, FittedBatchHasUnitTerminalMoments) {
  std::mt19937_64 rng(5);
  std::vector<Path> ps;
  for (int i = 0; i < 50; ++i) ps.push_back(time_augment(test::gaussian_path(rng, 6, 2, 0.4)));
  PathBatch b(ps);
  auto s = fit_standardization(b);
  ASSERT_EQ(s.mu_T.size(), 2);
  PathBatch z = standardize(b, s);
  for (Eigen::Index c = 1; c <= 2; ++c) {
    double m = 0, v = 0;
    for (const auto& p : z) m += p.values()(5, c);
    m /= 50;
    for (const auto& p : z) v += (p.values()(5, c) - m) * (p.values()(5, c) - m);
    v /= 50;
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-12);
  }
  EXPECT_EQ(z[0].values().col(0), b[0].values().col(0));
}

TEST(StrideSplit, Examples) {
  Path s = time_augment(p1({10, 11, 13, 14}, {1, 2, 3, 4}));
  auto a = stride_split(s, 2, 2);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[1].grid().times(), (std::vector<double>{0, 1}));
  EXPECT_EQ(a[1](0, 1), 3);
  EXPECT_EQ(a[1](1, 0), 1);
  EXPECT_EQ(stride_split(s, 2, 1).size(), 3u);
  auto whole = stride_split(s, 4, 1);
  ASSERT_EQ(whole.size(), 1u);
  EXPECT_EQ(whole[0].values().col(1), s.values().col(1));
  EXPECT_THROW(stride_split(s, 5, 1), Error);
}

TEST(MedianTerminalFilter, Examples) {
  std::vector<Path> same{p1({0, 1, 2}, {0, 1, 2}), p1({5, 6, 7}, {1, 1, 1})};
  EXPECT_EQ(median_terminal_filter(same).size(), 2u);

  std::vector<Path> w{p1({0, 0.5, 1}, {0, 1, 2}), p1({0, 1, 2}, {0, 1, 2}), p1({0, 1.5, 3}, {0, 1, 2})};
  auto kept = median_terminal_filter(w);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].grid().times(), (std::vector<double>{0, 1, 2}));
  // Span-2 window is resampled on its own nodes.
  EXPECT_EQ(kept[1](2, 0), 2);
  // Span-1 window is held flat after t = 1.
  EXPECT_EQ(kept[0](1, 0), 2);
  EXPECT_EQ(kept[0](2, 0), 2);

  std::vector<Path> one{p1({3, 4}, {1, 2})};
  auto k1 = median_terminal_filter(one);
  ASSERT_EQ(k1.size(), 1u);
  EXPECT_EQ(k1[0].grid().times(), (std::vector<double>{0, 1}));

  // Even count: lower-middle span is the threshold.
  std::vector<Path> four{p1({0, 1}, {0, 1}), p1({0, 2}, {0, 1}), p1({0, 3}, {0, 1}), p1({0, 4}, {0, 1})};
  EXPECT_EQ(median_terminal_filter(four).size(), 2u);
}

TEST(Csv, RoundTripAndValidation) {
  std::mt19937_64 rng(9);
  std::vector<Path> ps;
  for (int i = 0; i < 3; ++i) ps.push_back(time_augment(test::gaussian_path(rng, 5, 2, 1.0)));
  std::stringstream ss;
  write_paths_csv(ss, ps);
  auto back = read_paths_csv(ss);
  ASSERT_EQ(back.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(time_augment(back[i]).values(), ps[i].values());
  }

  std::stringstream bad("series_id,t,ch0\na,0,1\na,0,2\n");
  try {
    read_paths_csv(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  std::stringstream split("series_id,t,ch0\na,0,1\na,1,2\nb,0,1\nb,1,1\na,2,2\n");
  EXPECT_THROW(read_paths_csv(split), Error);
  std::stringstream junk("series_id,t,ch0\na,0,x\n");
  EXPECT_THROW(read_paths_csv(junk), Error);
  std::stringstream header("id,t,ch0\n");
  EXPECT_THROW(read_paths_csv(header), Error);
}
