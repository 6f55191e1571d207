#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <doctest.h>

#include "facecoder/dataset.hpp"
#include "facecoder/io.hpp"
#include "support/testing.hpp"

using namespace facecoder;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

Image random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> level(0, 255);
  Image img(w, h);
  for (float& v : img.mutable_pixels()) v = static_cast<float>(level(rng)) / 255.0f;
  return img;
}

CodeVector random_full_code(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 3.0);
  Eigen::VectorXd f(kCodeDim);
  for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = g(rng) * std::pow(10.0, static_cast<double>(i % 7) - 3);
  return CodeVector::unflatten(f);
}

}  // namespace

TEST_CASE("PPM round trip is exact for 8-bit images") {
  const Image img = random_image(13, 7, 1);
  const auto bytes = encode_ppm(img);
  CHECK(std::string(bytes.begin(), bytes.begin() + 2) == "P6");
  CHECK(decode_ppm(bytes) == img);
  CHECK(encode_ppm(decode_ppm(bytes)) == bytes);
  const auto dir = testing::scratch_dir("io_ppm");
  write_ppm(img, dir / "a.ppm");
  CHECK(read_ppm(dir / "a.ppm") == img);
}

TEST_CASE("PPM stores round(255 v) without a gamma curve") {
  Image img(2, 1);
  img.set(0, 0, Eigen::Vector3d(0.5, 0.2, 1.0));
  img.set(1, 0, Eigen::Vector3d(0.0, 0.998, 0.001));
  const auto b = encode_ppm(img);
  const std::size_t px = b.size() - 6;
  CHECK(b[px + 0] == 128);
  CHECK(b[px + 1] == 51);
  CHECK(b[px + 2] == 255);
  CHECK(b[px + 3] == 0);
  CHECK(b[px + 4] == 254);
  CHECK(b[px + 5] == 0);
  const Image q = quantize_8bit(img);
  CHECK(decode_ppm(encode_ppm(q)) == q);
}

TEST_CASE("PPM headers with comments and arbitrary whitespace parse") {
  std::string s = "P6\n# a comment\n2  1\n255\n";
  s += std::string("\x00\x80\xff\x10\x20\x30", 6);
  const Image img = decode_ppm(bytes_of(s));
  CHECK(img.width() == 2);
  CHECK(img.height() == 1);
  CHECK(img.at(0, 0).y() == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("PPM corruption yields structured errors") {
  const auto good = encode_ppm(random_image(4, 4, 2));
  SUBCASE("wrong magic") {
    auto b = good;
    b[1] = '3';
    CHECK_ERROR_KIND(decode_ppm(b), ErrorKind::MagicMismatch);
  }
  SUBCASE("truncated pixels") {
    const std::vector<std::uint8_t> b(good.begin(), good.end() - 5);
    const auto e = testing::error_of([&] { decode_ppm(b); });
    REQUIRE(e.has_value());
    CHECK(e->kind() == ErrorKind::Truncated);
    CHECK(e->section() == "pixels");
  }
  SUBCASE("truncated header") {
    CHECK_ERROR_KIND(decode_ppm(bytes_of("P6\n4 4")), ErrorKind::Truncated);
    CHECK_ERROR_KIND(decode_ppm(bytes_of("P")), ErrorKind::Truncated);
  }
  SUBCASE("bad header values") {
    CHECK_ERROR_KIND(decode_ppm(bytes_of("P6\n4 x\n255\n")), ErrorKind::Parse);
    CHECK_ERROR_KIND(decode_ppm(bytes_of("P6\n0 4\n255\n")), ErrorKind::Parse);
    CHECK_ERROR_KIND(decode_ppm(bytes_of("P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06")), ErrorKind::Parse);
  }
  SUBCASE("trailing bytes") {
    auto b = good;
    b.push_back(7);
    CHECK_ERROR_KIND(decode_ppm(b), ErrorKind::Parse);
  }
  SUBCASE("missing file") { CHECK_ERROR_KIND(read_ppm("/nonexistent/x.ppm"), ErrorKind::Io); }
}

TEST_CASE("code JSON round trip is bit-exact") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CodeVector x = random_full_code(seed);
    const CodeVector back = decode_code_json(encode_code_json(x));
    CHECK(back == x);
  }
  CodeVector tiny;
  tiny.alpha(0) = std::numeric_limits<double>::denorm_min();
  tiny.beta(3) = -std::numeric_limits<double>::max();
  tiny.gamma(26) = 0.1 + 0.2;
  CHECK(decode_code_json(encode_code_json(tiny)) == tiny);
  const auto dir = testing::scratch_dir("io_code");
  write_code_json(tiny, dir / "c.json");
  CHECK(read_code_json(dir / "c.json") == tiny);
}

TEST_CASE("code JSON errors name the offending key") {
  const std::string good = encode_code_json(CodeVector{});
  CHECK_ERROR_KIND(decode_code_json("{"), ErrorKind::Parse);
  CHECK_ERROR_KIND(decode_code_json("[]"), ErrorKind::Parse);
  auto section_of = [](const std::string& text) {
    const auto e = testing::error_of([&] { decode_code_json(text); });
    REQUIRE(e.has_value());
    CHECK(e->kind() == ErrorKind::Parse);
    return e->section();
  };
  std::string missing = good;
  missing.replace(missing.find("\"gamma\""), 7, "\"gamme\"");
  CHECK(section_of(missing) == "gamme");
  const std::string short_rotation =
      "{\"alpha\":" + std::string("[") + std::string(79 * 2, ' ') + "]}";
  CHECK(section_of(short_rotation) == "alpha");
  std::string wrong = good;
  const auto r = wrong.find("\"rotation\"");
  const auto open = wrong.find('[', r);
  wrong.insert(open + 1, "\"x\",");
  CHECK(section_of(wrong) == "rotation");
  CHECK_ERROR_KIND(read_code_json("/nonexistent/c.json"), ErrorKind::Io);
}

TEST_CASE("landmark JSON round trip is bit-exact") {
  LandmarkSet l;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 239);
  for (std::uint32_t j = 0; j < 46; ++j) l.push_back({Eigen::Vector2d(u(rng), u(rng)), (j % 5) / 4.0, 1000 + j});
  const LandmarkSet back = decode_landmarks_json(encode_landmarks_json(l));
  REQUIRE(back.size() == l.size());
  for (std::size_t j = 0; j < l.size(); ++j) {
    CHECK(back[j].position == l[j].position);
    CHECK(back[j].confidence == l[j].confidence);
    CHECK(back[j].vertex == l[j].vertex);
  }
  // Entries may come in any order; "index" places them.
  const std::string reversed =
      "[{\"index\":1,\"x\":3,\"y\":4,\"confidence\":1,\"vertex_index\":9},"
      "{\"index\":0,\"x\":1,\"y\":2,\"confidence\":0.5,\"vertex_index\":8}]";
  const LandmarkSet r = decode_landmarks_json(reversed);
  CHECK(r[0].vertex == 8u);
  CHECK(r[1].position == Eigen::Vector2d(3, 4));
}

TEST_CASE("landmark JSON errors") {
  CHECK_ERROR_KIND(decode_landmarks_json("{}"), ErrorKind::Parse);
  CHECK_ERROR_KIND(decode_landmarks_json("[{\"index\":0}]"), ErrorKind::Parse);
  CHECK_ERROR_KIND(decode_landmarks_json("[{\"index\":-1,\"x\":1,\"y\":1,\"confidence\":1,\"vertex_index\":0}]"),
                   ErrorKind::Parse);
  CHECK_ERROR_KIND(decode_landmarks_json("[{\"index\":0,\"x\":1,\"y\":1,\"confidence\":1,\"vertex_index\":0},"
                                         "{\"index\":0,\"x\":1,\"y\":1,\"confidence\":1,\"vertex_index\":0}]"),
                   ErrorKind::Parse);
  CHECK_ERROR_KIND(decode_landmarks_json("[{\"index\":0,\"x\":\"a\",\"y\":1,\"confidence\":1,\"vertex_index\":0}]"),
                   ErrorKind::Parse);
  CHECK_ERROR_KIND(decode_landmarks_json("[{\"index\":0,\"x\":1,\"y\":1,\"confidence\":1,\"vertex_index\":1.5}]"),
                   ErrorKind::Parse);
}

TEST_CASE("text file helpers") {
  const auto dir = testing::scratch_dir("io_text");
  write_text_file(dir / "t.txt", "hello\nworld");
  CHECK(read_text_file(dir / "t.txt") == "hello\nworld");
  CHECK_ERROR_KIND(read_text_file(dir / "none.txt"), ErrorKind::Io);
  CHECK_ERROR_KIND(write_text_file("/nonexistent/dir/t.txt", "x"), ErrorKind::Io);
}
