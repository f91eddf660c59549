#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "dmmeeg/edf.hpp"

using namespace dmmeeg;

namespace {

std::string field(const std::string& s, std::size_t w) {
  std::string out = s.substr(0, w);
  out.append(w - out.size(), ' ');
  return out;
}

// Two signals, one 1 s record of 250 samples each, laid out byte by byte.
std::vector<std::uint8_t> hand_built_file(std::vector<std::int16_t>& a, std::vector<std::int16_t>& b) {
  std::string h;
  h += field("0", 8);
  h += field("patient-x", 80);
  h += field("rec-y", 80);
  h += field("01.02.03", 8);
  h += field("04.05.06", 8);
  h += field("768", 8);
  h += field("", 44);
  h += field("1", 8);
  h += field("1", 8);
  h += field("2", 4);
  EXPECT_EQ(h.size(), 256u);
  h += field("EEG FP1-REF", 16) + field("EEG F7-REF", 16);
  h += field("AgAgCl", 80) + field("AgAgCl", 80);
  h += field("uV", 8) + field("uV", 8);
  h += field("-1000", 8) + field("-500", 8);
  h += field("1000", 8) + field("500", 8);
  h += field("-32768", 8) + field("-2048", 8);
  h += field("32767", 8) + field("2047", 8);
  h += field("HP:0.1Hz", 80) + field("", 80);
  h += field("250", 8) + field("250", 8);
  h += field("", 32) + field("", 32);
  EXPECT_EQ(h.size(), 768u);
  std::vector<std::uint8_t> bytes(h.begin(), h.end());
  a.clear();
  b.clear();
  for (int i = 0; i < 250; ++i) {
    a.push_back(static_cast<std::int16_t>(i * 131 - 16000));
    b.push_back(static_cast<std::int16_t>((i % 50) * 80 - 2000));
  }
  for (const auto* sig : {&a, &b})
    for (auto v : *sig) {
      const auto u = static_cast<std::uint16_t>(v);
      bytes.push_back(static_cast<std::uint8_t>(u & 0xff));
      bytes.push_back(static_cast<std::uint8_t>(u >> 8));
    }
  return bytes;
}

EdfErrorCode code_of(const std::vector<std::uint8_t>& bytes) {
  try {
    parse_edf(bytes);
  } catch (const EdfError& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an EdfError";
  return EdfErrorCode::bad_field;
}

ChannelCalibration cal(std::int64_t dmin, std::int64_t dmax, double pmin, double pmax) {
  ChannelCalibration c;
  c.label = "C";
  c.digital_min = dmin;
  c.digital_max = dmax;
  c.physical_min = pmin;
  c.physical_max = pmax;
  return c;
}

EdfSignalSpec constant_signal(const std::string& label, std::int16_t value, std::int64_t spr, std::int64_t records) {
  EdfSignalSpec s;
  s.calibration.label = label;
  s.calibration.physical_min = -3276.8;
  s.calibration.physical_max = 3276.7;
  s.calibration.samples_per_record = spr;
  s.digital.assign(static_cast<std::size_t>(spr * records), value);
  return s;
}

}  // namespace

TEST(EdfParse, HandBuiltFileFieldByField) {
  std::vector<std::int16_t> a, b;
  const auto bytes = hand_built_file(a, b);
  const EdfFile f = read_edf(bytes);
  EXPECT_EQ(f.header.patient, field("patient-x", 80));
  EXPECT_EQ(f.header.start_date, "01.02.03");
  EXPECT_EQ(f.header.start_time, "04.05.06");
  EXPECT_EQ(f.records, 1);
  EXPECT_EQ(f.record_duration_s, 1.0);
  ASSERT_EQ(f.signals.size(), 2u);
  EXPECT_EQ(f.signals[0].prefiltering, field("HP:0.1Hz", 80));
  EXPECT_EQ(f.samples[0], a);
  EXPECT_EQ(f.samples[1], b);

  const RawRecording rec = parse_edf(bytes, "s1");
  EXPECT_EQ(rec.session_id, "s1");
  EXPECT_EQ(rec.duration_s, 1.0);
  ASSERT_EQ(rec.channels.size(), 2u);
  EXPECT_EQ(rec.channels[0].calibration.label, "EEG FP1-REF");
  EXPECT_EQ(rec.channels[1].calibration.digital_min, -2048);
  EXPECT_EQ(rec.channels[1].calibration.physical_max, 500.0);
  for (const auto& ch : rec.channels) {
    EXPECT_EQ(ch.samples.size(), 250u);
    EXPECT_EQ(ch.sample_rate_hz, 250.0);
  }
  for (std::size_t i = 0; i < 250; ++i) {
    EXPECT_DOUBLE_EQ(rec.channels[0].samples[i], (a[i] + 32768.0) * 2000.0 / 65535.0 - 1000.0);
    EXPECT_DOUBLE_EQ(rec.channels[1].samples[i], (b[i] + 2048.0) * 1000.0 / 4095.0 - 500.0);
  }
}

TEST(EdfParse, TruncatedAfterFixedHeader) {
  std::vector<std::int16_t> a, b;
  auto bytes = hand_built_file(a, b);
  bytes.resize(256);
  EXPECT_EQ(code_of(bytes), EdfErrorCode::truncated);
  try {
    parse_edf(bytes);
  } catch (const EdfError& e) {
    EXPECT_NE(std::string(e.what()).find("signal headers"), std::string::npos) << e.what();
  }
}

TEST(EdfParse, OneSignalWithShortSignalHeader) {
  const auto f = make_edf({constant_signal("FP1", 7, 10, 1)}, 1, 1.0);
  auto bytes = write_edf(f);
  bytes.resize(256 + 200);
  EXPECT_EQ(code_of(bytes), EdfErrorCode::truncated);
}

TEST(EdfParse, MissingDataRecords) {
  const auto f = make_edf({constant_signal("FP1", 7, 10, 3)}, 3, 1.0);
  auto bytes = write_edf(f);
  bytes.pop_back();
  EXPECT_EQ(code_of(bytes), EdfErrorCode::truncated);
}

TEST(EdfParse, RejectsNonZeroVersion) {
  auto f = make_edf({constant_signal("FP1", 7, 10, 1)}, 1, 1.0);
  f.header.version = field("1", 8);
  EXPECT_EQ(code_of(write_edf(f)), EdfErrorCode::unsupported_version);
  f.header.version = field(" 0", 8);
  EXPECT_EQ(code_of(write_edf(f)), EdfErrorCode::unsupported_version);
}

TEST(EdfParse, RejectsEqualDigitalBounds) {
  auto spec = constant_signal("FP1", 7, 10, 1);
  auto f = make_edf({spec}, 1, 1.0);
  f.signals[0].digital_min = field("100", 8);
  f.signals[0].digital_max = field("100", 8);
  EXPECT_EQ(code_of(write_edf(f)), EdfErrorCode::calibration);
}

TEST(EdfParse, RejectsUnknownUnitAcceptsBlank) {
  auto f = make_edf({constant_signal("FP1", 7, 10, 1)}, 1, 1.0);
  f.signals[0].physical_dimension = field("mV", 8);
  EXPECT_EQ(code_of(write_edf(f)), EdfErrorCode::unsupported_unit);
  f.signals[0].physical_dimension = field("", 8);
  EXPECT_NO_THROW(parse_edf(write_edf(f)));
}

TEST(EdfParse, HeaderBytesMustMatchSignalCount) {
  auto f = make_edf({constant_signal("FP1", 7, 10, 1)}, 1, 1.0);
  f.header.header_bytes = field("256", 8);
  EXPECT_EQ(code_of(write_edf(f)), EdfErrorCode::bad_field);
}

TEST(EdfParse, UnknownRecordCountIsInferred) {
  auto f = make_edf({constant_signal("FP1", 7, 10, 4)}, 4, 0.5);
  f.header.num_records = field("-1", 8);
  const auto g = read_edf(write_edf(f));
  EXPECT_EQ(g.records, 4);
  EXPECT_EQ(g.samples[0].size(), 40u);
}

TEST(EdfParse, AnnotationChannelsAreDropped) {
  auto f = make_edf({constant_signal("FP1", 7, 10, 1), constant_signal("EDF Annotations", 0, 10, 1)}, 1, 1.0);
  const auto rec = parse_edf(write_edf(f));
  ASSERT_EQ(rec.channels.size(), 1u);
  ASSERT_EQ(rec.dropped_channels.size(), 1u);
  EXPECT_EQ(rec.dropped_channels[0], "EDF Annotations");
}

TEST(EdfRoundTrip, FuzzedFilesAreBitExact) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ns = std::uniform_int_distribution<int>(1, 5)(rng);
    const auto records = std::uniform_int_distribution<std::int64_t>(0, 4)(rng);
    std::vector<EdfSignalSpec> sigs;
    for (int s = 0; s < ns; ++s) {
      EdfSignalSpec spec;
      spec.calibration.label = "CH" + std::to_string(s);
      spec.calibration.samples_per_record = std::uniform_int_distribution<std::int64_t>(1, 40)(rng);
      spec.calibration.physical_min = -std::uniform_real_distribution<double>(1, 5000)(rng);
      spec.calibration.physical_max = std::uniform_real_distribution<double>(1, 5000)(rng);
      std::uniform_int_distribution<int> d(-32768, 32767);
      for (std::int64_t i = 0; i < spec.calibration.samples_per_record * records; ++i)
        spec.digital.push_back(static_cast<std::int16_t>(d(rng)));
      sigs.push_back(spec);
    }
    const auto f = make_edf(sigs, records, 0.25 * std::uniform_int_distribution<int>(1, 8)(rng));
    const auto bytes = write_edf(f);
    const auto g = read_edf(bytes);
    EXPECT_EQ(write_edf(g), bytes);
    EXPECT_EQ(g.samples, f.samples);
  }
}

TEST(EdfFuzz, TruncationsAlwaysRaiseTruncated) {
  std::vector<std::int16_t> a, b;
  const auto bytes = hand_built_file(a, b);
  for (std::size_t n = 0; n < bytes.size(); n += 7) {
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
    EXPECT_EQ(code_of(cut), EdfErrorCode::truncated) << "length " << n;
  }
}

TEST(DigitalToPhysical, Endpoints) {
  const auto c = cal(-2048, 2047, -500.0, 500.0);
  EXPECT_EQ(digital_to_physical(-2048, c), -500.0);
  EXPECT_EQ(digital_to_physical(2047, c), 500.0);
}

TEST(DigitalToPhysical, ZeroOnFullRange) {
  const auto c = cal(-32768, 32767, -1000.0, 1000.0);
  EXPECT_NEAR(digital_to_physical(0, c), 1000.0 / 65535.0, 1e-12);
  EXPECT_NEAR(digital_to_physical(0, c), 0.015259, 1e-6);
}

TEST(DigitalToPhysical, Affine) {
  const auto c = cal(-32768, 32767, -873.5, 1200.25);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> d(-32768, 32767);
  for (int i = 0; i < 1000; ++i) {
    const int d1 = d(rng), d2 = d(rng);
    if ((d1 + d2) % 2 != 0) continue;
    const double mid = digital_to_physical((d1 + d2) / 2, c);
    const double avg = 0.5 * (digital_to_physical(d1, c) + digital_to_physical(d2, c));
    EXPECT_NEAR(mid, avg, 1e-11);
  }
}

TEST(ClipFirstMinute, LongRecordingIsCut) {
  const auto rec = parse_edf(write_edf(make_edf({constant_signal("FP1", 3, 250, 120)}, 120, 1.0)), "long");
  const auto out = clip_first_minute(rec);
  EXPECT_EQ(out.channels[0].samples.size(), 15000u);
  EXPECT_EQ(out.duration_s, 60.0);
  EXPECT_EQ(out.session_id, "long");
  EXPECT_EQ(out.channels[0].calibration.label, "FP1");
}

TEST(ClipFirstMinute, ExactMinuteUnchanged) {
  const auto rec = parse_edf(write_edf(make_edf({constant_signal("FP1", 3, 250, 60)}, 60, 1.0)));
  EXPECT_EQ(clip_first_minute(rec).channels[0].samples, rec.channels[0].samples);
}

TEST(ClipFirstMinute, ShortRecordingNamesSession) {
  const auto rec = parse_edf(write_edf(make_edf({constant_signal("FP1", 3, 250, 59)}, 59, 1.0)), "sess-59");
  try {
    clip_first_minute(rec);
    FAIL();
  } catch (const EdfError& e) {
    EXPECT_EQ(e.code(), EdfErrorCode::too_short);
    EXPECT_NE(std::string(e.what()).find("sess-59"), std::string::npos);
  }
}
