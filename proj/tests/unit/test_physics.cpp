#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mspflow/errors.hpp"
#include "mspflow/physics.hpp"

using namespace mspflow;

TEST(Physics, EffectiveSaturation) {
  FluidProps p;
  EXPECT_EQ(effective_saturation(p.s_rw, p), 0.0);
  EXPECT_DOUBLE_EQ(effective_saturation(1.0 - p.s_rn, p), 1.0);
  EXPECT_DOUBLE_EQ(effective_saturation(0.5, p), (0.5 - 1e-6) / (1.0 - 2e-6));
  EXPECT_EQ(effective_saturation(-0.1, p), 0.0);
  EXPECT_EQ(effective_saturation(1.1, p), 1.0);
}

TEST(Physics, FractionalFlowEndpoints) {
  FluidProps p;
  EXPECT_EQ(fractional_flow(0.0, p, Phase::Wetting), 0.0);
  EXPECT_EQ(fractional_flow(0.0, p, Phase::NonWetting), 1.0);
  EXPECT_EQ(fractional_flow(1.0, p, Phase::Wetting), 1.0);
}

TEST(Physics, FractionalFlowAtHalfEffective) {
  FluidProps p;
  p.s_rw = 0.0;
  p.s_rn = 0.0;
  // lambda_w = 0.25, lambda_n = 0.25 / 5
  EXPECT_NEAR(fractional_flow(0.5, p, Phase::Wetting), 0.25 / (0.25 + 0.05), 1e-15);
  EXPECT_NEAR(fractional_flow(0.5, p, Phase::Wetting), 5.0 / 6.0, 1e-15);
}

TEST(Physics, FractionalFlowsSumExactlyToOne) {
  for (int p_exp : {1, 2}) {
    FluidProps p;
    p.kr_exponent = p_exp;
    for (int k = 0; k <= 1000; ++k) {
      const PhasePair f = fractional_flows(k / 1000.0, p);
      EXPECT_EQ(f.w + f.n, 1.0);
    }
  }
}

TEST(Physics, FractionalFlowMonotone) {
  for (int p_exp : {1, 2}) {
    FluidProps p;
    p.kr_exponent = p_exp;
    double prev = -1.0;
    for (int k = 0; k <= 1000; ++k) {
      const double fw = fractional_flow(k / 1000.0, p, Phase::Wetting);
      EXPECT_GE(fw, prev);
      prev = fw;
    }
  }
}

TEST(Physics, FractionalFlowLipschitzBound) {
  FluidProps p;
  p.mu_w = 1.0;
  p.mu_n = 1.0;
  const int n = 4000;
  std::vector<double> fw(n + 1);
  for (int k = 0; k <= n; ++k) fw[k] = fractional_flow(static_cast<double>(k) / n, p, Phase::Wetting);
  double worst = 0.0;
  for (int a = 0; a <= n; a += 7) {
    for (int b = a + 1; b <= n; b += 3) {
      const double ds = static_cast<double>(b - a) / n;
      worst = std::max(worst, std::abs(fw[b] - fw[a]) / ds);
    }
  }
  EXPECT_LE(worst, 16.0);
}

TEST(Physics, SwappedPropsMirrorMobilities) {
  FluidProps p;
  p.s_rw = 0.05;
  p.s_rn = 0.1;
  const FluidProps q = p.swapped();
  for (int k = 0; k <= 100; ++k) {
    const double s = k / 100.0;
    const PhasePair a = fractional_flows(s, p);
    const PhasePair b = fractional_flows(1.0 - s, q);
    EXPECT_NEAR(a.w, b.n, 1e-15);
    EXPECT_NEAR(a.n, b.w, 1e-15);
  }
}

TEST(Physics, TotalMobilityField) {
  const auto g = GridHierarchy::build(4, 4, 2, 1, 1);
  FluidProps p;
  Medium m = homogeneous_medium(g, 1.0);
  const Vector ones = Vector::Constant(g.num_cells(), 1.0);
  EXPECT_NEAR(total_mobility_field(ones, m, p).maxCoeff(), 1.0, 1e-12);
  FluidProps p0 = p;
  p0.s_rw = p0.s_rn = 0.0;
  const Vector half = Vector::Constant(g.num_cells(), 0.5);
  const Vector kn = total_mobility_field(half, m, p0);
  for (int c = 0; c < g.num_cells(); ++c) EXPECT_NEAR(kn[c], 0.30, 1e-15);
  Medium m2 = m;
  m2.kappa[3] = 2.0;
  const Vector kn2 = total_mobility_field(half, m2, p0);
  EXPECT_GT(kn2[3], kn[3]);
}

TEST(Physics, Sources) {
  const auto g = GridHierarchy::build(100, 100, 10, 1, 1);
  const Sources two = two_point_source(g, 0.2);
  int nonzero = 0;
  for (int c = 0; c < g.num_cells(); ++c) nonzero += two.qw[c] != 0.0;
  EXPECT_EQ(nonzero, 2);
  EXPECT_EQ(two.qw.maxCoeff(), 0.2);
  EXPECT_EQ(two.qw.minCoeff(), -0.2);
  EXPECT_EQ(two.qn.cwiseAbs().maxCoeff(), 0.0);

  const Sources five = five_point_source(g, 0.2);
  EXPECT_NEAR(five.qw.sum() * g.cell_area(), 0.0, 1e-18);
  for (const int i : {49, 50}) {
    for (const int j : {49, 50}) EXPECT_DOUBLE_EQ(five.qw[g.cell(i, j)], -0.2);
  }
  EXPECT_EQ(five.qw[g.cell(0, 99)], 0.2);

  const auto odd = GridHierarchy::build(9, 9, 3, 1, 1);
  const Sources five_odd = five_point_source(odd, 0.2);
  EXPECT_DOUBLE_EQ(five_odd.qw.minCoeff(), -0.8);
  EXPECT_EQ(five_odd.qw[odd.cell(4, 4)], -0.8);
}

TEST(Physics, FractionalFlowSinkSplit) {
  const auto g = GridHierarchy::build(4, 4, 2, 1, 1);
  FluidProps p;
  Sources s = two_point_source(g, 0.2);
  Vector sw = Vector::Constant(g.num_cells(), 0.5);
  const Sources eff = effective_sources(s, sw, p, SinkTreatment::FractionalFlow);
  const int sink = g.cell(3, 3);
  const PhasePair f = fractional_flows(0.5, p);
  EXPECT_EQ(eff.qw[sink], -0.2 * f.w);
  EXPECT_EQ(eff.qn[sink], -0.2 * f.n);
  EXPECT_EQ(eff.qw[0], 0.2);
  const Sources pres = effective_sources(s, sw, p, SinkTreatment::Prescribed);
  EXPECT_EQ(pres.qw[sink], -0.2);
}

TEST(Physics, CapillaryOffIsZero) {
  CapillaryModel off;
  EXPECT_EQ(off.pc(0.3), 0.0);
  CapillaryModel lin{CapillaryModel::Kind::Linear, 2.0};
  EXPECT_DOUBLE_EQ(lin.pc(0.25), 1.5);
}

TEST(Physics, HighContrastGenerator) {
  const auto g = GridHierarchy::build(100, 100, 10, 1, 1);
  const Medium homog = gen_high_contrast(g, 1.0, HighContrastPattern::Mixed, 7);
  EXPECT_EQ(homog.kappa.minCoeff(), 1.0);
  EXPECT_EQ(homog.kappa.maxCoeff(), 1.0);
  const Medium m = gen_high_contrast(g, 2000.0, HighContrastPattern::Mixed, 7);
  EXPECT_EQ(m.kappa.maxCoeff() / m.kappa.minCoeff(), 2000.0);
  const Medium again = gen_high_contrast(g, 2000.0, HighContrastPattern::Mixed, 7);
  EXPECT_EQ(m.kappa, again.kappa);
  // Central symmetry: cell (i,j) and (nx-1-i, ny-1-j) agree.
  for (int j = 0; j < 100; ++j) {
    for (int i = 0; i < 100; ++i) EXPECT_EQ(m.kappa[g.cell(i, j)], m.kappa[g.cell(99 - i, 99 - j)]);
  }
  const Medium other = gen_high_contrast(g, 2000.0, HighContrastPattern::Mixed, 8);
  EXPECT_NE(m.kappa, other.kappa);
}

TEST(Physics, MediumRoundTrip) {
  const auto g = GridHierarchy::build(20, 10, 5, 2, 1);
  const Medium m = gen_high_contrast(g, 2000.0, HighContrastPattern::Channels, 3);
  const auto path = std::filesystem::temp_directory_path() / "mspflow_medium_roundtrip.txt";
  save_medium(m, path.string());
  const Medium back = load_medium(path.string(), g);
  EXPECT_EQ(back.kappa, m.kappa);
  std::filesystem::remove(path);
}

TEST(Physics, MediumLoadRejectsBadFiles) {
  const auto g = GridHierarchy::build(2, 2, 1, 1, 1);
  const auto dir = std::filesystem::temp_directory_path();
  auto write = [&](const char* name, const char* text) {
    const auto p = dir / name;
    std::ofstream(p) << text;
    return p.string();
  };
  EXPECT_THROW(load_medium(write("m_short.txt", "2 2\n1 1 1\n"), g), IngestionError);
  EXPECT_THROW(load_medium(write("m_long.txt", "2 2\n1 1 1 1 1\n"), g), IngestionError);
  EXPECT_THROW(load_medium(write("m_neg.txt", "2 2\n1 -1 1 1\n"), g), IngestionError);
  EXPECT_THROW(load_medium(write("m_dims.txt", "3 1\n1 1 1\n"), g), IngestionError);
  EXPECT_THROW(load_medium((dir / "does_not_exist.txt").string(), g), IngestionError);
  EXPECT_NO_THROW(load_medium(write("m_ok.txt", "2 2\n1 2\n3 4\n"), g));
}

TEST(Physics, FluidValidation) {
  FluidProps p;
  EXPECT_NO_THROW(p.validate());
  p.kr_exponent = 3;
  EXPECT_THROW(p.validate(), ConfigError);
  p = FluidProps{};
  p.s_rw = 0.6;
  p.s_rn = 0.5;
  EXPECT_THROW(p.validate(), ConfigError);
}
