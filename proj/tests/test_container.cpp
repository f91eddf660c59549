#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "dmmeeg/io.hpp"

using namespace dmmeeg;

namespace {

std::vector<std::uint8_t> expected_pair_bytes() {
  // "DMMT", version 1, 1 array, name "a", f64, ndim 1, dim 2, 1.5, -2.25
  return {'D', 'M', 'M', 'T', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 'a', 2, 1, 2, 0, 0, 0, 0, 0, 0, 0,
          0, 0, 0, 0, 0, 0, 0xf8, 0x3f, 0, 0, 0, 0, 0, 0, 0x02, 0xc0};
}

std::filesystem::path temp_dir() {
  auto d = std::filesystem::temp_directory_path() / ("dmmeeg_container_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(Container, ExactDyadicBytes) {
  TensorContainer c;
  NamedArray a;
  a.name = "a";
  a.dims = {2};
  a.values = std::vector<double>{1.5, -2.25};
  c.add(a);
  const auto bytes = encode_container(c);
  EXPECT_EQ(bytes, expected_pair_bytes());
  const auto back = decode_container(bytes);
  EXPECT_EQ(std::get<std::vector<double>>(back.at("a").values), (std::vector<double>{1.5, -2.25}));
  EXPECT_EQ(encode_container(back), bytes);
}

TEST(Container, EmptyIsValid) {
  const auto bytes = encode_container({});
  EXPECT_EQ(bytes.size(), 12u);
  EXPECT_TRUE(decode_container(bytes).arrays.empty());
}

TEST(Container, DuplicateNamesRejected) {
  TensorContainer c;
  c.add(make_array("x", Vector::Zero(2)));
  c.add(make_array("x", Vector::Zero(3)));
  EXPECT_THROW(encode_container(c), FormatError);
}

TEST(Container, BadMagicAndVersion) {
  auto bytes = expected_pair_bytes();
  bytes[0] = 'X';
  EXPECT_THROW(decode_container(bytes), FormatError);
  bytes = expected_pair_bytes();
  bytes[4] = 2;
  EXPECT_THROW(decode_container(bytes), FormatError);
}

TEST(Container, TruncationsAndTrailingBytes) {
  const auto bytes = expected_pair_bytes();
  for (std::size_t n = 0; n < bytes.size(); ++n)
    EXPECT_THROW(decode_container(std::span(bytes.data(), n)), FormatError) << n;
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_THROW(decode_container(longer), FormatError);
}

TEST(Container, AllDtypesRoundTrip) {
  TensorContainer c;
  NamedArray f;
  f.name = "f32";
  f.dims = {2, 2};
  f.values = std::vector<float>{1.f, -0.5f, 3.25f, 0.f};
  c.add(f);
  c.add(make_array("ints", std::vector<std::int64_t>{-7, 0, 1LL << 40}));
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  c.add(make_array("m", m));
  const auto back = decode_container(encode_container(c));
  EXPECT_EQ(back.at("f32").dtype(), DType::f32);
  EXPECT_EQ(to_ints(back.at("ints"))[2], 1LL << 40);
  EXPECT_EQ(to_matrix(back.at("m")), m);
  EXPECT_EQ(to_matrix(back.at("m"))(0, 2), 3.0);
}

TEST(Container, WriteIsAtomicAndReadable) {
  const auto dir = temp_dir();
  const auto path = dir / "x.dmmt";
  TensorContainer c;
  c.add(make_array("v", Vector::Constant(3, 2.0)));
  write_container(path, c);
  EXPECT_FALSE(std::filesystem::exists(dir / "x.dmmt.tmp"));
  EXPECT_EQ(to_vector(read_container(path).at("v")), Vector::Constant(3, 2.0));
  std::filesystem::remove_all(dir);
}

TEST(Container, ReadErrorNamesFile) {
  const auto dir = temp_dir();
  const auto path = dir / "corrupt.dmmt";
  write_text_atomic(path, "not a container");
  try {
    read_container(path);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("corrupt.dmmt"), std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST(Io, ParamsRoundTrip) {
  DmmConfig cfg;
  cfg.x_dim = 3;
  cfg.z_dim = 4;
  cfg.rnn_hidden = 7;
  cfg.transition_hidden = 5;
  cfg.emission_hidden = 6;
  cfg.std_floor = 1e-3;
  const auto p = init_dmm_params(cfg);
  const auto q = params_from_container(decode_container(encode_container(params_to_container(p))));
  EXPECT_EQ(q.std_floor, 1e-3);
  visit_arrays([](const std::string& name, const auto& a, const auto& b) { EXPECT_EQ(a, b) << name; }, std::string{}, p, q);
}

TEST(Io, DatasetRoundTrip) {
  std::vector<FeatureSequence> seqs(3);
  for (int i = 0; i < 3; ++i) {
    seqs[i].session_id = "s" + std::to_string(i);
    seqs[i].data = Matrix::Random(4, 2);
    seqs[i].feature_names = {"a", "b"};
  }
  seqs[0].label = Label::normal;
  seqs[1].label = Label::abnormal;
  const auto back = dataset_from_container(decode_container(encode_container(dataset_to_container(seqs))));
  ASSERT_EQ(back.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].session_id, seqs[i].session_id);
    EXPECT_EQ(back[i].data, seqs[i].data);
    EXPECT_EQ(back[i].label, seqs[i].label);
    EXPECT_EQ(back[i].feature_names, seqs[i].feature_names);
  }
}

TEST(Io, TableRoundTrip) {
  FeatureTable t;
  t.space = "latent";
  t.ids = {"x", "y"};
  t.labels = {Label::abnormal, std::nullopt};
  t.features = Matrix::Random(2, 5);
  const auto back = table_from_container(decode_container(encode_container(table_to_container(t))));
  EXPECT_EQ(back.space, "latent");
  EXPECT_EQ(back.ids, t.ids);
  EXPECT_EQ(back.labels, t.labels);
  EXPECT_EQ(back.features, t.features);
  EXPECT_THROW(back.known_labels(), DataError);
}

TEST(Io, ShortestRoundTripFormatting) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 1000; ++i) {
    const double v = n01(rng) * std::pow(10.0, std::uniform_int_distribution<int>(-20, 20)(rng));
    EXPECT_EQ(std::stod(fmt(v)), v);
  }
  EXPECT_EQ(fmt(0.5), "0.5");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
}
