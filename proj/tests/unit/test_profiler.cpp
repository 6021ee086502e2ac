#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "safmn/model/safmn.hpp"
#include "safmn/model/variants.hpp"
#include "safmn/profile/profiler.hpp"

using namespace safmn;

namespace {

ModelConfig variant(const char* name, std::size_t scale = 4) {
  ModelConfig cfg;
  cfg.scale = scale;
  cfg.variant = *find_variant(name);
  return cfg;
}

// Hand-written per-layer MAC count for the default architecture at h x w.
std::uint64_t baseline_macs(std::uint64_t h, std::uint64_t w, std::uint64_t scale) {
  const std::uint64_t hw = h * w, c = 36;
  std::uint64_t macs = 3 * 9 * c * hw;  // head
  std::uint64_t block = 9 * 9 * hw;     // full-res depthwise group
  for (int i = 1; i <= 3; ++i) block += 9 * 9 * (h >> i) * (w >> i);
  block += c * c * hw;                          // aggregation
  block += c * 9 * 2 * c * hw + 2 * c * c * hw;  // mixer
  macs += 8 * block;
  macs += c * 9 * 3 * scale * scale * hw;  // tail
  return macs;
}

struct Row {
  const char* name;
  std::uint64_t params;
  double gflops;
  double macts;  // < 0: not listed
};

// Ablation table at 320 x 180.
const Row kTable[] = {
    {"baseline", 239520, 13.56, 76.70},       {"no-safm", 225408, 12.90, 54.61},
    {"no-ccm", 30720, 1.61, 26.93},           {"safm-no-fm", 239520, 13.56, 76.70},
    {"safm-no-mr", 239520, 13.64, 87.78},     {"safm-no-fa", 228864, 12.96, 60.11},
    {"safm-no-fm-mr", 239520, 13.64, 87.78},  {"safm-no-fm-fa", 228864, 12.96, 60.11},
    {"safm-no-fm-mr-fa", 228864, 13.05, 71.19}, {"pool-avg", 239520, 13.56, 76.70},
    {"pool-nearest", 239520, 13.56, 76.70},   {"attn-none", 239520, 13.56, 76.70},
    {"attn-sigmoid", 239520, 13.56, 76.70},   {"ccm-se", 260976, 13.59, 76.70},
    {"ccm-channel-mlp", 73632, 4.00, 76.70},  {"ccm-inverted-residual", 245280, 13.85, 110.00},
    {"no-ln", 238368, 13.55, 76.70},          {"norm-bn", 239520, 13.72, 76.70},
    {"norm-fbn", 238368, 13.55, 76.70},       {"norm-l2", 238368, 13.55, 76.70},
};

}  // namespace

TEST(Profiler, BaselineTotals) {
  const ModelConfig cfg = variant("baseline");
  EXPECT_EQ(count_params(cfg), 239520u);
  EXPECT_EQ(count_acts(cfg, 180, 320), 76700160u);
  EXPECT_EQ(count_flops(cfg, 180, 320), 13542474240u);
  EXPECT_EQ(count_flops(cfg, 180, 320), baseline_macs(180, 320, 4));
  EXPECT_LT(std::abs(count_flops(cfg, 180, 320) / 13.56e9 - 1.0), 0.002);
  EXPECT_EQ(count_params(variant("baseline", 2)), 227820u);
  EXPECT_EQ(count_params(variant("baseline", 3)), 232695u);
  EXPECT_EQ(count_params(variant("no-ln")), 238368u);
}

TEST(Profiler, SingleOneByOneConv) {
  detail::ReportBuilder b(180, 320, FlopConvention::conv_only);
  b.conv("x", 36, 36, 1, 1, 180, 320);
  EXPECT_EQ(b.take().total.flops, 36u * 36 * 57600);
  EXPECT_EQ(36u * 36 * 57600, 74649600u);
  EXPECT_EQ(detail::ReportBuilder(1, 1, FlopConvention::conv_only).take().total.flops, 0u);
}

TEST(Profiler, AgreesWithParameterStore) {
  for (const auto& nv : variant_registry()) {
    for (std::size_t scale : {2u, 3u, 4u}) {
      ModelConfig cfg;
      cfg.scale = scale;
      cfg.variant = nv.spec;
      EXPECT_EQ(count_params(cfg), SafmnModel<float>(cfg).parameter_count()) << nv.name;
    }
  }
}

TEST(Profiler, AblationTable) {
  for (const Row& r : kTable) {
    const ModelConfig cfg = variant(r.name);
    EXPECT_EQ(count_params(cfg), r.params) << r.name;
    const double flops = static_cast<double>(count_flops(cfg, 180, 320, FlopConvention::reference_tool));
    EXPECT_LT(std::abs(flops / (r.gflops * 1e9) - 1.0), 0.005) << r.name << " " << flops;
    const double acts = static_cast<double>(count_acts(cfg, 180, 320));
    EXPECT_LT(std::abs(acts / (r.macts * 1e6) - 1.0), 0.002) << r.name << " " << acts;
  }
  EXPECT_EQ(count_acts(variant("ccm-inverted-residual"), 180, 320), 109877760u);
}

TEST(Profiler, ConvOnlyFlopsOfBaselineWithinTolerance) {
  // The reference convention only adds interpolation charges here.
  const ModelConfig cfg = variant("baseline");
  const auto ref = count_flops(cfg, 180, 320, FlopConvention::reference_tool);
  EXPECT_EQ(ref - count_flops(cfg, 180, 320), 8u * 3 * 9 * 57600);
}

TEST(Profiler, LinearInPixelCount) {
  for (const auto& nv : variant_registry()) {
    ModelConfig cfg;
    cfg.variant = nv.spec;
    // sizes divisible by 8 make every pyramid level exact; the squeeze path of
    // the SE mixer is a per-image constant, so compare equal increments
    const auto a1 = count_acts(cfg, 48, 64), a2 = count_acts(cfg, 96, 64), a3 = count_acts(cfg, 144, 64);
    EXPECT_EQ(a3 - a2, a2 - a1) << nv.name;
    const auto f1 = count_flops(cfg, 48, 64), f2 = count_flops(cfg, 96, 64), f3 = count_flops(cfg, 144, 64);
    EXPECT_EQ(f3 - f2, f2 - f1) << nv.name;
    if (nv.spec.mixer != MixerKind::ccm_with_se) {
      EXPECT_EQ(a2, 2 * a1) << nv.name;
    }
    const double ratio = static_cast<double>(count_flops(cfg, 360, 320)) / count_flops(cfg, 180, 320);
    EXPECT_NEAR(ratio, 2.0, 2e-3) << nv.name;
  }
}

TEST(Profiler, TotalsEqualSumOfRecords) {
  for (const auto& nv : variant_registry()) {
    ModelConfig cfg;
    cfg.variant = nv.spec;
    const auto rep = profile_model(cfg, 45, 80, FlopConvention::reference_tool);
    std::uint64_t p = 0, f = 0, a = 0;
    for (const auto& r : rep.records) {
      p += r.params;
      f += r.flops;
      a += r.acts;
    }
    EXPECT_EQ(p, rep.total.params);
    EXPECT_EQ(f, rep.total.flops);
    EXPECT_EQ(a, rep.total.acts);
  }
}

TEST(Report, CsvRoundTripsTotals) {
  const auto rep = profile_model(variant("baseline"), 180, 320);
  std::istringstream in(emit_report(rep, ReportFormat::csv));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "name,kind,params,flops,acts");
  std::uint64_t p = 0, f = 0, a = 0;
  std::vector<std::string> last;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    ASSERT_EQ(cols.size(), 5u);
    if (cols[0] == "TOTAL") {
      last = cols;
      break;
    }
    p += std::stoull(cols[2]);
    f += std::stoull(cols[3]);
    a += std::stoull(cols[4]);
  }
  ASSERT_FALSE(last.empty());
  EXPECT_EQ(std::stoull(last[2]), p);
  EXPECT_EQ(std::stoull(last[3]), f);
  EXPECT_EQ(std::stoull(last[4]), a);
  EXPECT_EQ(p, 239520u);
}

TEST(Report, TableEndsWithTotalRow) {
  const auto text = emit_report(profile_model(variant("baseline"), 180, 320), ReportFormat::table);
  const auto last = text.substr(text.rfind('\n', text.size() - 2) + 1);
  EXPECT_EQ(last.rfind("TOTAL", 0), 0u);
  EXPECT_NE(last.find("239520"), std::string::npos);
  EXPECT_NE(last.find("76700160"), std::string::npos);
}

TEST(Report, JsonLinesAndDeterminism) {
  const auto rep = profile_model(variant("ccm-se"), 180, 320);
  const auto text = emit_report(rep, "json-lines");
  EXPECT_EQ(text, emit_report(profile_model(variant("ccm-se"), 180, 320), "json-lines"));
  std::istringstream in(text);
  std::string line, lastline;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("name") && j.contains("kind") && j.contains("params") && j.contains("flops") &&
                j.contains("acts"));
    lastline = line;
    ++n;
  }
  EXPECT_EQ(n, rep.records.size() + 1);
  EXPECT_EQ(nlohmann::json::parse(lastline)["params"].get<std::uint64_t>(), 260976u);
}

TEST(Report, UnknownFormatIsUsageError) {
  EXPECT_THROW(emit_report(profile_model(ModelConfig{}, 4, 4), "xml"), UsageError);
}
