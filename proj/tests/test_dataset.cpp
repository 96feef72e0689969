#include <doctest.h>

#include <cstring>
#include <limits>
#include <filesystem>

#include "dcpl/dataset.hpp"
#include "dcpl/error.hpp"
#include "test_support.hpp"

using namespace dcpl;
using dcpl::testing::TempDir;

namespace {

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back(v >> 8);
}
void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}
void put_f64(std::vector<std::uint8_t>& b, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  for (int i = 0; i < 8; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

// Hand-assembled container: n=2, d_f=1, d_p=1, k=2, true labels only.
std::vector<std::uint8_t> tiny_container(std::uint32_t label1 = 1) {
  std::vector<std::uint8_t> b = {'D', 'C', 'P', 'L'};
  put_u16(b, 1);
  put_u32(b, 2);
  put_u32(b, 1);
  put_u32(b, 1);
  put_u32(b, 2);
  put_u32(b, kFlagTrueLabels);
  put_f64(b, 0.5);
  put_f64(b, -1.5);
  put_f64(b, 2.0);
  put_f64(b, 3.0);
  put_u32(b, 0);
  put_u32(b, label1);
  return b;
}

}  // namespace

TEST_CASE("encode_dataset matches the documented little-endian layout") {
  Dataset ds;
  ds.k = 2;
  ds.features_f = Mat(2, 1, {0.5, -1.5});
  ds.features_p = Mat(2, 1, {2.0, 3.0});
  ds.true_labels = Labels{0, 1};
  CHECK(encode_dataset(ds) == tiny_container());
  CHECK(decode_dataset(tiny_container()) == ds);
}

TEST_CASE("save then load is the identity, bitwise for floats") {
  TempDir dir("roundtrip");
  Dataset ds = testing::random_dataset(5, 37, 4, 6, 3);
  ds.pseudo_labels = Labels(37, 2);
  ModelParams head(4, 6);
  head.weights(1, 2) = -0.125;
  head.bias[3] = 1e-300;
  ds.source_head = head;
  ds.projection = Mat(3, 6, 0.25);
  save_dataset(ds, dir.file("a.dcpl"));
  const Dataset back = load_dataset(dir.file("a.dcpl"));
  CHECK(back == ds);
}

TEST_CASE("saving twice gives byte-identical files") {
  TempDir dir("twice");
  const Dataset ds = testing::random_dataset(9, 20, 3, 4, 4);
  save_dataset(ds, dir.file("a.dcpl"));
  save_dataset(ds, dir.file("b.dcpl"));
  CHECK(testing::read_text(dir.file("a.dcpl")) == testing::read_text(dir.file("b.dcpl")));
}

TEST_CASE("a dataset without true labels clears the flag and omits the section") {
  Dataset ds = testing::random_dataset(1, 10, 3, 2, 2);
  const auto with = encode_dataset(ds);
  ds.true_labels.reset();
  const auto without = encode_dataset(ds);
  CHECK(with.size() - without.size() == 10 * 4);
  std::uint32_t flags = 0;
  std::memcpy(&flags, without.data() + 6 + 16, 4);
  CHECK((flags & kFlagTrueLabels) == 0);
  CHECK_FALSE(decode_dataset(without).true_labels.has_value());
}

TEST_CASE("decode reports a label outside [0, k) with its row") {
  try {
    decode_dataset(tiny_container(7));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 1") != std::string::npos);
    CHECK(msg.find("7") != std::string::npos);
  }
}

TEST_CASE("decode rejects malformed containers") {
  auto bad_magic = tiny_container();
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_dataset(bad_magic), FormatError);

  auto bad_version = tiny_container();
  bad_version[4] = 9;
  CHECK_THROWS_AS(decode_dataset(bad_version), FormatError);

  auto truncated = tiny_container();
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(decode_dataset(truncated), FormatError);

  auto trailing = tiny_container();
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_dataset(trailing), FormatError);

  auto unknown_flag = tiny_container();
  unknown_flag[22] |= 0x80;
  CHECK_THROWS_AS(decode_dataset(unknown_flag), FormatError);

  auto nan = tiny_container();
  const double q = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(nan.data() + 26, &q, 8);
  CHECK_THROWS_AS(decode_dataset(nan), FormatError);
}

TEST_CASE("n = 0 is a degenerate input") {
  std::vector<std::uint8_t> b = {'D', 'C', 'P', 'L'};
  put_u16(b, 1);
  for (std::uint32_t v : {0u, 1u, 1u, 2u, 0u}) put_u32(b, v);
  CHECK_THROWS_AS(decode_dataset(b), DegenerateInputError);

  Dataset empty;
  empty.k = 2;
  empty.features_f = Mat(0, 1);
  empty.features_p = Mat(0, 1);
  CHECK_THROWS_AS(validate(empty), DegenerateInputError);
}

TEST_CASE("validate rejects inconsistent datasets") {
  Dataset ds = testing::random_dataset(2, 5, 3, 2, 2);
  validate(ds);

  Dataset rows = ds;
  rows.features_p = Mat(4, 2);
  CHECK_THROWS_AS(validate(rows), FormatError);

  Dataset label = ds;
  (*label.true_labels)[3] = 3;
  CHECK_THROWS_AS(validate(label), FormatError);

  Dataset nonfinite = ds;
  nonfinite.features_f(2, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(validate(nonfinite), FormatError);

  Dataset head = ds;
  head.source_head = ModelParams(2, 2);
  CHECK_THROWS_AS(validate(head), FormatError);
}

TEST_CASE("CSV ingestion with and without labels") {
  TempDir dir("csv");
  testing::write_text(dir.file("a.csv"),
                      "id,label,f_0,f_1,p_0\n"
                      "0,1,0.5,1.5,2\n"
                      "1,0,-1,0,3e-1\n"
                      "2,2,4,4,4\n");
  const Dataset a = load_dataset(dir.file("a.csv"));
  CHECK(a.k == 3);
  CHECK(a.n() == 3);
  CHECK(a.d_f() == 2);
  CHECK(a.d_p() == 1);
  CHECK(*a.true_labels == Labels{1, 0, 2});
  CHECK(a.features_p(1, 0) == 0.3);

  testing::write_text(dir.file("b.txt"), "id,f_0,p_0,p_1\n0,1,2,3\n");
  CHECK_THROWS_AS(load_dataset(dir.file("b.txt")), FormatError);
  const Dataset b = load_dataset(dir.file("b.txt"), {4});
  CHECK(b.k == 4);
  CHECK_FALSE(b.true_labels.has_value());

  testing::write_text(dir.file("c.csv"), "id,label,f_0,p_0\n0,1,abc,2\n");
  CHECK_THROWS_AS(load_dataset(dir.file("c.csv")), FormatError);
  testing::write_text(dir.file("d.csv"), "id,label,f_0,p_0\n0,1,2\n");
  CHECK_THROWS_AS(load_dataset(dir.file("d.csv")), FormatError);
  testing::write_text(dir.file("e.csv"), "id,label,f_0,p_0\n");
  CHECK_THROWS_AS(load_dataset(dir.file("e.csv")), DegenerateInputError);
  testing::write_text(dir.file("f.csv"), "id,label,f_1,p_0\n0,0,1,1\n");
  CHECK_THROWS_AS(load_dataset(dir.file("f.csv")), FormatError);
}

TEST_CASE("missing files and unknown formats are located errors") {
  TempDir dir("missing");
  CHECK_THROWS_AS(load_dataset(dir.file("nope.dcpl")), FormatError);
  testing::write_text(dir.file("junk.bin"), "\x01\x02\x03\x04\x05");
  CHECK_THROWS_AS(load_dataset(dir.file("junk.bin")), FormatError);
}

TEST_CASE("standalone head file round trip") {
  TempDir dir("head");
  ModelParams head(3, 2);
  head.weights = Mat(3, 2, {1, 2, 3, 4, 5, 6});
  head.bias = {0.1, -0.2, 0.3};
  save_head(head, dir.file("h.dcph"));
  CHECK(load_head(dir.file("h.dcph")) == head);
  CHECK(testing::read_text(dir.file("h.dcph")).substr(0, 4) == "DCPH");

  testing::write_text(dir.file("bad.dcph"), "DCPL");
  CHECK_THROWS_AS(load_head(dir.file("bad.dcph")), FormatError);
}

TEST_CASE("matrix CSV round trip is exact") {
  const Mat m(2, 3, {0.1, 1.0 / 3.0, -2e-17, 5.0, 1e300, -0.0});
  const std::string text = matrix_to_csv(m);
  CHECK(matrix_from_csv(text) == m);
  CHECK_THROWS_AS(matrix_from_csv("1,2\n3\n"), FormatError);
}

TEST_CASE("atomic writes leave no temp files and fail on unwritable paths") {
  TempDir dir("atomic");
  write_file_atomic(dir.file("x.txt"), std::string("hello"));
  write_file_atomic(dir.file("x.txt"), std::string("world"));
  CHECK(testing::read_text(dir.file("x.txt")) == "world");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  CHECK(entries == 1);
  CHECK_THROWS_AS(write_file_atomic(dir.file("no/such/dir/x.txt"), std::string("x")), FormatError);
}
