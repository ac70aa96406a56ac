#include <gtest/gtest.h>

#include <bit>
#include <sstream>

#include "support.hpp"

using namespace tbrain;

namespace {

std::string bytes_of(const ModelParams& p) {
  std::ostringstream out(std::ios::binary);
  save_model(out, p);
  return out.str();
}

ModelParams from_bytes(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return load_model(in);
}

ErrorCode load_error(const std::string& bytes) {
  try {
    (void)from_bytes(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

}  // namespace

TEST(InitParams, ShapesAndScale) {
  const auto p = init_params({10, 4, 16, 8, 12}, 3);
  EXPECT_NO_THROW(p.check_shapes());
  EXPECT_EQ(p.A.cols(), 14);
  EXPECT_EQ(p.a_bar, Segments::zeros(8));
  const double sd = std::sqrt(p.D.squaredNorm() / static_cast<double>(p.D.size()));
  EXPECT_NEAR(sd, 0.1 / std::sqrt(16.0), 0.01);
}

TEST(InitParams, SeedDeterminesParams) {
  EXPECT_EQ(init_params({6, 3, 5, 4, 5}, 1), init_params({6, 3, 5, 4, 5}, 1));
  EXPECT_NE(init_params({6, 3, 5, 4, 5}, 1).A, init_params({6, 3, 5, 4, 5}, 2).A);
}

TEST(ModelFile, HeaderLayout) {
  const auto p = support::small_params(1, 6, 4, 5, 4, 5, true, true);
  const auto bytes = bytes_of(p);
  EXPECT_EQ(bytes.substr(0, 7), "TBRAIN1");
  auto u32 = [&](std::size_t i) {
    std::uint32_t v = 0;
    for (int b = 3; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(bytes[7 + 4 * i + b]);
    return v;
  };
  EXPECT_EQ(u32(0), 6u);
  EXPECT_EQ(u32(1), 4u);
  EXPECT_EQ(u32(2), 5u);
  EXPECT_EQ(u32(3), 4u);
  EXPECT_EQ(u32(4), 5u);
  EXPECT_EQ(u32(5), kFlagSkip | kFlagTied);
  EXPECT_EQ(u32(6), 0u);
  const std::size_t doubles = 4 * 10 + 4 * 5 + 5 * 4 + 4 * 5 + 5 * 5 + 6 * 4;
  EXPECT_EQ(bytes.size(), 7 + 7 * 4 + doubles * 8);
  // First double is A(0,0), row-major.
  std::uint64_t raw = 0;
  for (int b = 7; b >= 0; --b) raw = (raw << 8) | static_cast<unsigned char>(bytes[35 + b]);
  EXPECT_EQ(std::bit_cast<double>(raw), p.A(0, 0));
  std::uint64_t raw2 = 0;
  for (int b = 7; b >= 0; --b) raw2 = (raw2 << 8) | static_cast<unsigned char>(bytes[43 + b]);
  EXPECT_EQ(std::bit_cast<double>(raw2), p.A(0, 1));
}

TEST(ModelFile, RoundTripIsBitExact) {
  for (bool tied : {true, false}) {
    auto p = support::small_params(4, 6, 4, 5, 4, 5, !tied, tied);
    Rng rng(2);
    for (std::uint64_t t : {3u, 17u}) {
      Scene s = support::random_scene(rng, 5, 6, 4, t);
      store_episode(s, p);
    }
    const auto bytes = bytes_of(p);
    const auto q = from_bytes(bytes);
    EXPECT_EQ(p, q);
    EXPECT_EQ(bytes, bytes_of(q));
  }
}

TEST(ModelFile, RejectsCorruption) {
  const auto bytes = bytes_of(support::small_params(1));
  EXPECT_EQ(load_error("TBRAIN2" + bytes.substr(7)), ErrorCode::kParse);
  EXPECT_EQ(load_error(bytes.substr(0, bytes.size() - 3)), ErrorCode::kParse);
  EXPECT_EQ(load_error(bytes + "x"), ErrorCode::kParse);
  std::string bad_flags = bytes;
  bad_flags[7 + 5 * 4] = static_cast<char>(0x7f);
  EXPECT_EQ(load_error(bad_flags), ErrorCode::kParse);
  std::string zero_dim = bytes;
  for (int b = 0; b < 4; ++b) zero_dim[7 + b] = 0;
  EXPECT_EQ(load_error(zero_dim), ErrorCode::kParse);
}

TEST(ModelFile, TiedWeightsShareOneMatrix) {
  const auto p = support::small_params(1);
  EXPECT_EQ(&p.input_embeddings(), &p.A);
  EXPECT_EQ(p.concept_embedding(2), Vector(p.A.col(2)));
  EXPECT_EQ(p.predicate_embedding(1), Vector(p.A.col(6 + 1)));
}
