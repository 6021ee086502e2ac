#include <gtest/gtest.h>

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "safmn/imaging/color.hpp"
#include "safmn/imaging/image.hpp"
#include "safmn/imaging/metrics.hpp"
#include "safmn/imaging/png.hpp"
#include "safmn/imaging/resize.hpp"
#include "safmn/imaging/sampler.hpp"
#include "safmn/imaging/synthetic.hpp"
#include "support/fd.hpp"
#include "support/tmpdir.hpp"

using namespace safmn;
using safmn::testing::random_tensor;
using safmn::testing::TempDir;

namespace {

ImageBuffer random_image(std::size_t w, std::size_t h, std::mt19937_64& rng, int lo = 0, int hi = 255) {
  ImageBuffer img(w, h);
  std::uniform_int_distribution<int> d(lo, hi);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(d(rng));
  return img;
}

Tensor<double> plane(std::size_t h, std::size_t w, double fill) { return Tensor<double>(Shape{1, 1, h, w}, fill); }

// Keys cubic, written out from the piecewise definition with a = -0.5.
double keys(double x) {
  x = std::abs(x);
  if (x <= 1.0) return 1.5 * x * x * x - 2.5 * x * x + 1.0;
  if (x < 2.0) return -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0;
  return 0.0;
}

// One output sample of antialiased 1-D downscaling by `factor`, summing over
// a generous index range with edge clamping.
double resample_1d(std::span<const double> in, std::size_t i, double factor) {
  const double u = (i + 0.5) * factor - 0.5;
  double acc = 0.0, norm = 0.0;
  for (long j = -20; j < static_cast<long>(in.size()) + 20; ++j) {
    const double wgt = keys((u - static_cast<double>(j)) / factor) / factor;
    const long c = std::clamp<long>(j, 0, static_cast<long>(in.size()) - 1);
    acc += wgt * in[static_cast<std::size_t>(c)];
    norm += wgt;
  }
  return acc / norm;
}

void write_raw_png(const std::filesystem::path& path, std::uint32_t format, const void* pixels,
                   std::size_t w, std::size_t h) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = format;
  ASSERT_NE(png_image_write_to_file(&img, path.c_str(), 0, pixels, 0, nullptr), 0);
}

}  // namespace

// --- PNG -------------------------------------------------------------------------------

TEST(Png, RoundTripIsLossless) {
  TempDir dir;
  std::mt19937_64 rng(1);
  for (auto [w, h] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 1}, {7, 3}, {64, 48}}) {
    const auto img = random_image(w, h, rng);
    encode_png(img, dir.path() / "a.png");
    EXPECT_EQ(decode_png(dir.path() / "a.png"), img);
  }
}

TEST(Png, SingleWhitePixel) {
  TempDir dir;
  encode_png(ImageBuffer(1, 1, 255), dir.path() / "w.png");
  const auto img = decode_png(dir.path() / "w.png");
  ASSERT_EQ(img.width, 1u);
  ASSERT_EQ(img.height, 1u);
  EXPECT_EQ(img.data, (std::vector<std::uint8_t>{255, 255, 255}));
  EXPECT_DOUBLE_EQ(rgb_to_y(img)[0], 235.0);
}

TEST(Png, GrayscaleReplicatedAndAlphaDropped) {
  TempDir dir;
  const std::uint8_t gray[] = {0, 50, 100, 200};
  write_raw_png(dir.path() / "g.png", PNG_FORMAT_GRAY, gray, 2, 2);
  const auto g = decode_png(dir.path() / "g.png");
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(g.data[3 * i + c], gray[i]);
  }
  const std::uint8_t rgba[] = {10, 20, 30, 0, 40, 50, 60, 128};
  write_raw_png(dir.path() / "a.png", PNG_FORMAT_RGBA, rgba, 2, 1);
  EXPECT_EQ(decode_png(dir.path() / "a.png").data, (std::vector<std::uint8_t>{10, 20, 30, 40, 50, 60}));
}

TEST(Png, SixteenBitIsUnsupported) {
  TempDir dir;
  const std::uint16_t px[] = {0, 1000, 65535, 30000, 20000, 10000};
  write_raw_png(dir.path() / "d.png", PNG_FORMAT_LINEAR_RGB, px, 2, 1);
  EXPECT_THROW(decode_png(dir.path() / "d.png"), UnsupportedFormatError);
}

TEST(Png, GarbageAndMissingFilesAreDecodeErrors) {
  TempDir dir;
  std::ofstream(dir.path() / "bad.png") << "definitely not an image";
  EXPECT_THROW(decode_png(dir.path() / "bad.png"), DecodeError);
  EXPECT_THROW(decode_png(dir.path() / "missing.png"), DecodeError);
  EXPECT_THROW(decode_png_memory({1, 2, 3}), DecodeError);
}

// --- bicubic ---------------------------------------------------------------------------

TEST(Bicubic, SameSizeIsIdentity) {
  std::mt19937_64 rng(2);
  const auto x = random_tensor(Shape{1, 3, 9, 7}, rng);
  EXPECT_EQ(bicubic_resize(x, 9, 7), x);
}

TEST(Bicubic, PreservesConstantsExactly) {
  for (auto [oh, ow] : std::vector<std::pair<std::size_t, std::size_t>>{{4, 4}, {3, 5}, {33, 17}, {64, 64}}) {
    const Tensor<double> x(Shape{1, 2, 16, 16}, 0.3);
    for (bool aa : {true, false}) {
      const auto y = bicubic_resize(x, oh, ow, aa);
      for (double v : y.data()) EXPECT_NEAR(v, 0.3, 1e-15);
    }
  }
}

TEST(Bicubic, RampDownscaleMatchesDirectKernel) {
  Tensor<double> x(Shape{1, 1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i);
  const auto y = bicubic_resize(x, 2, 2);
  // separable: filter the rows of the ramp, then the columns
  std::vector<std::vector<double>> rows(4, std::vector<double>(2));
  for (std::size_t r = 0; r < 4; ++r) {
    std::vector<double> line(4);
    for (std::size_t c = 0; c < 4; ++c) line[c] = x[r * 4 + c];
    for (std::size_t j = 0; j < 2; ++j) rows[r][j] = resample_1d(line, j, 2.0);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      std::vector<double> col{rows[0][j], rows[1][j], rows[2][j], rows[3][j]};
      EXPECT_NEAR(y[i * 2 + j], resample_1d(col, i, 2.0), 1e-12) << i << "," << j;
    }
  }
}

TEST(Bicubic, RandomDownscaleMatchesDirectKernel) {
  std::mt19937_64 rng(3);
  const auto x = random_tensor(Shape{1, 1, 1, 24}, rng);
  const auto y = bicubic_resize(x, 1, 8);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(y[j], resample_1d(x.data(), j, 3.0), 1e-12);
}

TEST(Bicubic, OvershootBounded) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 40; ++t) {
    const auto x = random_tensor(Shape{1, 1, 12, 10}, rng, 0.0, 1.0);
    const auto [lo, hi] = std::minmax_element(x.data().begin(), x.data().end());
    const double range = *hi - *lo;
    const std::size_t oh = 3 + t % 20, ow = 2 + (t * 7) % 25;
    for (bool aa : {true, false}) {
      const auto y = bicubic_resize(x, oh, ow, aa);  // keep alive: range-for would dangle on .data()
      for (double v : y.data()) {
        EXPECT_GE(v, *lo - 0.25 * range);
        EXPECT_LE(v, *hi + 0.25 * range);
      }
    }
  }
}

// --- color and metrics -------------------------------------------------------------------

TEST(Color, LumaEndpoints) {
  EXPECT_DOUBLE_EQ(luma(0, 0, 0), 16.0);
  EXPECT_NEAR(luma(1, 1, 1), 235.0, 1e-12);
  EXPECT_NEAR(luma(0, 1, 0), 144.553, 1e-12);
}

TEST(Metrics, PsnrClosedForms) {
  const auto a = plane(16, 16, 100.0);
  EXPECT_NEAR(psnr_plane(a, plane(16, 16, 101.0)), 48.13, 0.01);
  EXPECT_NEAR(psnr_plane(a, plane(16, 16, 101.0)), 20 * std::log10(255.0), 1e-12);
  // 10 log10(255^2 / 16^2) = 24.048
  EXPECT_NEAR(psnr_plane(a, plane(16, 16, 116.0)), 20 * std::log10(255.0 / 16.0), 1e-12);
  EXPECT_NEAR(psnr_plane(a, plane(16, 16, 116.0)), 24.048, 0.001);
  EXPECT_EQ(psnr_plane(a, a), std::numeric_limits<double>::infinity());
}

TEST(Metrics, PsnrOnImagesMatchesYOracle) {
  std::mt19937_64 rng(5);
  const auto a = random_image(20, 12, rng), b = random_image(20, 12, rng);
  double sse = 0.0;
  for (std::size_t y = 2; y < 10; ++y) {
    for (std::size_t x = 2; x < 18; ++x) {
      auto yv = [&](const ImageBuffer& im) {
        return 16.0 + (65.481 * im.at(x, y, 0) + 128.553 * im.at(x, y, 1) + 24.966 * im.at(x, y, 2)) / 255.0;
      };
      sse += (yv(a) - yv(b)) * (yv(a) - yv(b));
    }
  }
  EXPECT_NEAR(psnr_y(a, b, 2), 10 * std::log10(255.0 * 255.0 / (sse / 128.0)), 1e-9);
  EXPECT_EQ(psnr_y(a, a), std::numeric_limits<double>::infinity());
  EXPECT_DOUBLE_EQ(psnr_y(a, b), psnr_y(b, a));
}

TEST(Metrics, PsnrStrictlyDecreasingInError) {
  std::mt19937_64 rng(6);
  const auto a = random_tensor(Shape{1, 1, 20, 20}, rng, 50.0, 200.0);
  double prev = std::numeric_limits<double>::infinity();
  for (int e = 1; e <= 30; ++e) {
    auto b = a;
    for (auto& v : b.data()) v += 0.5 * e;
    const double p = psnr_plane(a, b);
    EXPECT_LT(p, prev);
    prev = p;
  }
  EXPECT_THROW(psnr_plane(a, a, 10), DimensionError);
  EXPECT_THROW(psnr_y(ImageBuffer(3, 3), ImageBuffer(3, 4)), DimensionError);
}

TEST(Metrics, SsimSelfIsExactlyOne) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 5; ++t) {
    const auto a = random_image(24 + t, 16, rng);
    EXPECT_EQ(ssim_y(a, a), 1.0);
    EXPECT_EQ(ssim_y(a, a, 2), 1.0);
  }
  const auto flat = plane(11, 11, 40.0);
  EXPECT_EQ(ssim_plane(flat, flat), 1.0);
}

TEST(Metrics, SsimInvertedIsLowAndBounded) {
  std::mt19937_64 rng(8);
  const auto a = random_image(32, 32, rng, 64, 192);
  ImageBuffer b = a;
  for (auto& v : b.data) v = static_cast<std::uint8_t>(255 - v);
  const double s = ssim_y(a, b);
  EXPECT_LT(s, 0.5);
  EXPECT_GE(s, -1.0);
  EXPECT_LE(std::abs(ssim_y(a, random_image(32, 32, rng))), 1.0);
}

TEST(Metrics, SsimConstantShiftIsLuminanceTerm) {
  const double m = 120.0, c1 = 2.55 * 2.55;
  const double want = (2 * m * (m + 10) + c1) / (m * m + (m + 10) * (m + 10) + c1);
  EXPECT_NEAR(ssim_plane(plane(15, 13, m), plane(15, 13, m + 10)), want, 1e-12);
}

TEST(Metrics, SsimRejectsSmallImages) {
  EXPECT_THROW(ssim_plane(plane(10, 20, 0), plane(10, 20, 0)), DimensionError);
  EXPECT_THROW(ssim_plane(plane(14, 14, 0), plane(14, 14, 0), 2), DimensionError);
}

TEST(Metrics, GaussianWindowNormalized) {
  const auto g = gaussian_window();
  double sum = 0.0;
  for (double v : g) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-14);
  EXPECT_NEAR(g[5 * 11 + 4] / g[5 * 11 + 5], std::exp(-1.0 / (2 * 1.5 * 1.5)), 1e-14);
}

// --- augmentation and sampling ----------------------------------------------------------

TEST(Dihedral, GroupOfOrderEight) {
  std::mt19937_64 rng(9);
  const auto x = random_tensor(Shape{1, 2, 5, 5}, rng);
  std::vector<Tensor<double>> elems;
  for (int d = 0; d < kDihedralOrder; ++d) elems.push_back(dihedral(x, d));
  EXPECT_EQ(elems[0], x);
  for (int a = 0; a < 8; ++a) {
    for (int b = a + 1; b < 8; ++b) EXPECT_NE(elems[a], elems[b]);
  }
  // composition table: every product is an element, each row a permutation
  for (int a = 0; a < 8; ++a) {
    std::set<int> row;
    bool has_inverse = false;
    for (int b = 0; b < 8; ++b) {
      const auto ab = dihedral(dihedral(x, a), b);
      const auto it = std::find(elems.begin(), elems.end(), ab);
      ASSERT_NE(it, elems.end()) << a << " then " << b;
      row.insert(static_cast<int>(it - elems.begin()));
      has_inverse = has_inverse || it == elems.begin();
    }
    EXPECT_EQ(row.size(), 8u);
    EXPECT_TRUE(has_inverse);
  }
  EXPECT_EQ(dihedral(dihedral(x, 4), 4), x);
  EXPECT_EQ(dihedral(dihedral(dihedral(dihedral(x, 1), 1), 1), 1), x);
  EXPECT_THROW(dihedral(x, 8), DimensionError);
}

TEST(Dihedral, RotationIsCounterClockwise) {
  const Tensor<double> x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(dihedral(x, 1), Tensor<double>(Shape{1, 1, 2, 2}, {2, 4, 1, 3}));
  EXPECT_EQ(dihedral(x, 4), Tensor<double>(Shape{1, 1, 2, 2}, {2, 1, 4, 3}));
}

TEST(Sampler, DegradeAndCrop) {
  std::mt19937_64 rng(10);
  const auto hr = random_tensor(Shape{1, 3, 23, 18}, rng, 0.0, 1.0);
  const auto c = crop_to_multiple(hr, 4);
  EXPECT_EQ(c.shape(), (Shape{1, 3, 20, 16}));
  EXPECT_EQ(c.at(0, 1, 0, 0), hr.at(0, 1, 1, 1));
  EXPECT_EQ(degrade(c, 4).shape(), (Shape{1, 3, 5, 4}));
  EXPECT_THROW(degrade(hr, 4), DataError);
}

TEST(Sampler, PatchesAlignedWithSourceUnderAugmentation) {
  const auto hr = to_tensor<double>(synthetic_image(96, 3));
  const auto pair = make_training_pair(hr, 2);
  const PatchSampler cfg{16, 12, 77, true};
  const auto b = sample_batch<double>(hr, 2, cfg);
  ASSERT_EQ(b.lr.shape(), (Shape{12, 3, 16, 16}));
  ASSERT_EQ(b.hr.shape(), (Shape{12, 3, 32, 32}));
  // reproduce the draws: image, top, left, transform
  std::mt19937_64 rng(77);
  std::set<int> seen;
  for (std::size_t k = 0; k < 12; ++k) {
    (void)rng();
    const std::size_t top = rng() % (48 - 16 + 1), left = rng() % (48 - 16 + 1);
    const int d = static_cast<int>(rng() % 8);
    seen.insert(d);
    Tensor<double> lr(Shape{1, 3, 16, 16}), hp(Shape{1, 3, 32, 32});
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < 32; ++i) {
        for (std::size_t j = 0; j < 32; ++j) {
          if (i < 16 && j < 16) lr.at(0, c, i, j) = pair.lr.at(0, c, top + i, left + j);
          hp.at(0, c, i, j) = pair.hr.at(0, c, 2 * top + i, 2 * left + j);
        }
      }
    }
    const auto lr_d = dihedral(lr, d), hr_d = dihedral(hp, d);
    for (std::size_t i = 0; i < lr_d.numel(); ++i) EXPECT_EQ(b.lr[k * lr_d.numel() + i], lr_d[i]);
    for (std::size_t i = 0; i < hr_d.numel(); ++i) EXPECT_EQ(b.hr[k * hr_d.numel() + i], hr_d[i]);
    // interior of the degraded HR patch reproduces the LR patch
    const auto down = degrade(hr_d, 2);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t i = 3; i < 13; ++i) {
        for (std::size_t j = 3; j < 13; ++j) {
          EXPECT_NEAR(down.at(0, c, i, j), b.lr.at(k, c, i, j), 1e-12);
        }
      }
    }
  }
  EXPECT_GT(seen.size(), 3u);
}

TEST(Sampler, DeterministicBySeed) {
  const auto hr = to_tensor<double>(synthetic_image(64, 5));
  const PatchSampler a{8, 6, 1, true}, b{8, 6, 2, true};
  EXPECT_EQ(sample_batch<float>(hr, 4, a).lr, sample_batch<float>(hr, 4, a).lr);
  EXPECT_NE(sample_batch<float>(hr, 4, a).lr, sample_batch<float>(hr, 4, b).lr);
}

TEST(Sampler, ImageSmallerThanPatchIsDataError) {
  const auto hr = to_tensor<double>(synthetic_image(32, 5));
  EXPECT_THROW(sample_batch<float>(hr, 4, PatchSampler{9, 1, 0, false}), DataError);
  EXPECT_NO_THROW(sample_batch<float>(hr, 4, PatchSampler{8, 1, 0, false}));
}

TEST(Synthetic, DeterministicAndTextured) {
  const auto a = synthetic_image(64, 3);
  EXPECT_EQ(a, synthetic_image(64, 3));
  EXPECT_NE(a, synthetic_image(64, 4));
  std::set<std::uint8_t> levels(a.data.begin(), a.data.end());
  EXPECT_GT(levels.size(), 64u);
}
