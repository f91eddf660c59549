#pragma once

// European Data Format (EDF) reading and writing, and conversion of the
// stored 16-bit samples to calibrated recordings in microvolts.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dmmeeg/error.hpp"

namespace dmmeeg {

enum class EdfErrorCode { truncated, unsupported_version, calibration, bad_field, unsupported_unit, too_short };

class EdfError : public FormatError {
 public:
  EdfError(EdfErrorCode code, const std::string& what) : FormatError(what), code_(code) {}
  EdfErrorCode code() const noexcept { return code_; }

 private:
  EdfErrorCode code_;
};

inline constexpr std::size_t kEdfFixedHeaderBytes = 256;
inline constexpr std::size_t kEdfSignalHeaderBytes = 256;
inline constexpr std::string_view kEdfAnnotationsLabel = "EDF Annotations";

/// Fixed header fields, raw (space padded) as stored.
struct EdfHeader {
  std::string version;          // 8
  std::string patient;          // 80
  std::string recording;        // 80
  std::string start_date;       // 8
  std::string start_time;       // 8
  std::string header_bytes;     // 8
  std::string reserved;         // 44
  std::string num_records;      // 8
  std::string record_duration;  // 8
  std::string num_signals;      // 4
};

/// Per-signal header fields, raw as stored.
struct EdfSignalHeader {
  std::string label;               // 16
  std::string transducer;          // 80
  std::string physical_dimension;  // 8
  std::string physical_min;        // 8
  std::string physical_max;        // 8
  std::string digital_min;         // 8
  std::string digital_max;         // 8
  std::string prefiltering;        // 80
  std::string samples_per_record;  // 8
  std::string reserved;            // 32
};

/// Structural content of an EDF file; samples[s] concatenates all records of signal s.
struct EdfFile {
  EdfHeader header;
  std::vector<EdfSignalHeader> signals;
  std::vector<std::vector<std::int16_t>> samples;
  std::int64_t records = 0;
  double record_duration_s = 0.0;
};

struct ChannelCalibration {
  std::string label;
  double physical_min = -1.0;  // uV
  double physical_max = 1.0;   // uV
  std::int64_t digital_min = -32768;
  std::int64_t digital_max = 32767;
  std::int64_t samples_per_record = 1;
  std::string physical_dimension = "uV";

  void validate() const {
    if (digital_max <= digital_min)
      throw EdfError(EdfErrorCode::calibration, "calibration error: signal '" + label + "' has digital_max <= digital_min");
    if (physical_max == physical_min)
      throw EdfError(EdfErrorCode::calibration, "calibration error: signal '" + label + "' has physical_min == physical_max");
    if (samples_per_record < 1)
      throw EdfError(EdfErrorCode::bad_field, "signal '" + label + "' has samples_per_record < 1");
  }
};

struct Channel {
  ChannelCalibration calibration;
  double sample_rate_hz = 0.0;
  std::vector<double> samples;  // uV
};

struct RawRecording {
  std::string session_id;
  std::vector<Channel> channels;
  double duration_s = 0.0;
  std::vector<std::string> dropped_channels;  // annotation signals skipped while parsing
};

/// (d - dmin) * (pmax - pmin) / (dmax - dmin) + pmin
inline double digital_to_physical(std::int64_t d, const ChannelCalibration& cal) {
  return static_cast<double>(d - cal.digital_min) * (cal.physical_max - cal.physical_min) /
             static_cast<double>(cal.digital_max - cal.digital_min) +
         cal.physical_min;
}

namespace edf_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.remove_suffix(1);
  return s;
}

inline std::int64_t parse_int(std::string_view raw, const std::string& field) {
  const auto s = trim(raw);
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw EdfError(EdfErrorCode::bad_field, "field '" + field + "' is not an integer: '" + std::string(raw) + "'");
  return v;
}

inline double parse_real(std::string_view raw, const std::string& field) {
  auto s = trim(raw);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw EdfError(EdfErrorCode::bad_field, "field '" + field + "' is not a number: '" + std::string(raw) + "'");
  return v;
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string take(std::size_t width, const char* region) {
    need(width, region);
    std::string out(reinterpret_cast<const char*>(bytes_.data() + pos_), width);
    for (char c : out)
      if (static_cast<unsigned char>(c) < 32 || static_cast<unsigned char>(c) > 126)
        throw EdfError(EdfErrorCode::bad_field, std::string("non-ASCII byte in ") + region);
    pos_ += width;
    return out;
  }

  void need(std::size_t width, const char* region) const {
    if (bytes_.size() - pos_ < width)
      throw EdfError(EdfErrorCode::truncated, std::string("truncated input: missing ") + region + " (need " +
                                                  std::to_string(width) + " bytes at offset " + std::to_string(pos_) +
                                                  ", " + std::to_string(bytes_.size() - pos_) + " available)");
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::uint8_t* here() const { return bytes_.data() + pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() > width) s.resize(width);
  s.append(width - s.size(), ' ');
  return s;
}

}  // namespace edf_detail

/// Formats a value into a space-padded EDF field of `width` bytes.
inline std::string edf_field(const std::string& value, std::size_t width) { return edf_detail::pad(value, width); }

inline std::string edf_field(double value, std::size_t width) {
  char buf[64];
  for (int prec = 12; prec >= 1; --prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, value);
    if (std::string_view(buf).size() <= width) return edf_detail::pad(buf, width);
  }
  throw EdfError(EdfErrorCode::bad_field, "value does not fit in an EDF field");
}

inline std::string edf_field(std::int64_t value, std::size_t width) {
  const auto s = std::to_string(value);
  if (s.size() > width) throw EdfError(EdfErrorCode::bad_field, "integer does not fit in an EDF field");
  return edf_detail::pad(s, width);
}

/// Structural parse: header fields, sample counts and raw digital samples.
inline EdfFile read_edf(std::span<const std::uint8_t> bytes) {
  using edf_detail::parse_int;
  edf_detail::Cursor in(bytes);
  in.need(kEdfFixedHeaderBytes, "fixed header");
  EdfFile f;
  auto& h = f.header;
  h.version = in.take(8, "version field");
  h.patient = in.take(80, "patient field");
  h.recording = in.take(80, "recording field");
  h.start_date = in.take(8, "start date field");
  h.start_time = in.take(8, "start time field");
  h.header_bytes = in.take(8, "header bytes field");
  h.reserved = in.take(44, "reserved field");
  h.num_records = in.take(8, "number of records field");
  h.record_duration = in.take(8, "record duration field");
  h.num_signals = in.take(4, "number of signals field");

  if (edf_detail::trim(h.version) != "0" || h.version.front() != '0')
    throw EdfError(EdfErrorCode::unsupported_version, "unsupported EDF version '" + h.version + "'");
  const auto ns = parse_int(h.num_signals, "number of signals");
  if (ns < 1 || ns > 4096) throw EdfError(EdfErrorCode::bad_field, "number of signals out of range: " + std::to_string(ns));
  const auto nsz = static_cast<std::size_t>(ns);
  in.need(nsz * kEdfSignalHeaderBytes, "signal headers");
  const auto declared_header = parse_int(h.header_bytes, "header bytes");
  if (declared_header != static_cast<std::int64_t>(kEdfFixedHeaderBytes + nsz * kEdfSignalHeaderBytes))
    throw EdfError(EdfErrorCode::bad_field, "header bytes field " + std::to_string(declared_header) +
                                                " disagrees with " + std::to_string(ns) + " signals");

  f.signals.resize(nsz);
  auto each = [&](std::string EdfSignalHeader::*field, std::size_t width, const char* region) {
    for (auto& s : f.signals) s.*field = in.take(width, region);
  };
  each(&EdfSignalHeader::label, 16, "signal labels");
  each(&EdfSignalHeader::transducer, 80, "transducer fields");
  each(&EdfSignalHeader::physical_dimension, 8, "physical dimension fields");
  each(&EdfSignalHeader::physical_min, 8, "physical minimum fields");
  each(&EdfSignalHeader::physical_max, 8, "physical maximum fields");
  each(&EdfSignalHeader::digital_min, 8, "digital minimum fields");
  each(&EdfSignalHeader::digital_max, 8, "digital maximum fields");
  each(&EdfSignalHeader::prefiltering, 80, "prefiltering fields");
  each(&EdfSignalHeader::samples_per_record, 8, "samples per record fields");
  each(&EdfSignalHeader::reserved, 32, "signal reserved fields");

  std::size_t record_samples = 0;
  std::vector<std::size_t> spr(nsz);
  for (std::size_t s = 0; s < nsz; ++s) {
    const auto v = parse_int(f.signals[s].samples_per_record, "samples per record");
    if (v < 1 || v > (1 << 24))
      throw EdfError(EdfErrorCode::bad_field, "samples per record out of range for signal " + std::to_string(s));
    spr[s] = static_cast<std::size_t>(v);
    record_samples += spr[s];
  }
  const std::size_t record_bytes = 2 * record_samples;

  f.record_duration_s = edf_detail::parse_real(h.record_duration, "record duration");
  if (!(f.record_duration_s > 0.0)) throw EdfError(EdfErrorCode::bad_field, "record duration must be positive");
  f.records = parse_int(h.num_records, "number of records");
  if (f.records == -1) {
    f.records = static_cast<std::int64_t>(in.remaining() / record_bytes);
  } else if (f.records < 0) {
    throw EdfError(EdfErrorCode::bad_field, "negative number of records");
  }
  const auto nrec = static_cast<std::size_t>(f.records);
  if (nrec > in.remaining() / record_bytes)
    in.need(nrec * record_bytes, "data records");

  f.samples.resize(nsz);
  for (std::size_t s = 0; s < nsz; ++s) f.samples[s].reserve(nrec * spr[s]);
  for (std::size_t r = 0; r < nrec; ++r)
    for (std::size_t s = 0; s < nsz; ++s) {
      const std::uint8_t* p = in.here();
      for (std::size_t i = 0; i < spr[s]; ++i)
        f.samples[s].push_back(static_cast<std::int16_t>(static_cast<std::uint16_t>(p[2 * i]) |
                                                         (static_cast<std::uint16_t>(p[2 * i + 1]) << 8)));
      in.skip(2 * spr[s]);
    }
  return f;
}

/// Serializes header fields verbatim followed by the data records.
inline std::vector<std::uint8_t> write_edf(const EdfFile& f) {
  std::string head;
  const auto& h = f.header;
  for (const auto& [value, width] : {std::pair{&h.version, 8}, {&h.patient, 80}, {&h.recording, 80},
                                     {&h.start_date, 8}, {&h.start_time, 8}, {&h.header_bytes, 8},
                                     {&h.reserved, 44}, {&h.num_records, 8}, {&h.record_duration, 8},
                                     {&h.num_signals, 4}})
    head += edf_detail::pad(*value, static_cast<std::size_t>(width));
  auto each = [&](std::string EdfSignalHeader::*field, std::size_t width) {
    for (const auto& s : f.signals) head += edf_detail::pad(s.*field, width);
  };
  each(&EdfSignalHeader::label, 16);
  each(&EdfSignalHeader::transducer, 80);
  each(&EdfSignalHeader::physical_dimension, 8);
  each(&EdfSignalHeader::physical_min, 8);
  each(&EdfSignalHeader::physical_max, 8);
  each(&EdfSignalHeader::digital_min, 8);
  each(&EdfSignalHeader::digital_max, 8);
  each(&EdfSignalHeader::prefiltering, 80);
  each(&EdfSignalHeader::samples_per_record, 8);
  each(&EdfSignalHeader::reserved, 32);

  std::vector<std::uint8_t> out(head.begin(), head.end());
  std::vector<std::size_t> spr;
  for (const auto& s : f.signals) spr.push_back(static_cast<std::size_t>(edf_detail::parse_int(s.samples_per_record, "samples per record")));
  for (std::size_t r = 0; r < static_cast<std::size_t>(f.records); ++r)
    for (std::size_t s = 0; s < f.signals.size(); ++s)
      for (std::size_t i = 0; i < spr[s]; ++i) {
        const auto v = static_cast<std::uint16_t>(f.samples[s].at(r * spr[s] + i));
        out.push_back(static_cast<std::uint8_t>(v & 0xff));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
      }
  return out;
}

struct EdfSignalSpec {
  ChannelCalibration calibration;
  std::vector<std::int16_t> digital;  // records * samples_per_record values
};

/// Builds a well-formed EDF file from calibrations and digital samples.
inline EdfFile make_edf(const std::vector<EdfSignalSpec>& signals, std::int64_t records, double record_duration_s,
                        const std::string& patient = "X X X X", const std::string& recording = "Startdate X X X X") {
  EdfFile f;
  auto& h = f.header;
  h.version = edf_field(std::string("0"), 8);
  h.patient = edf_field(patient, 80);
  h.recording = edf_field(recording, 80);
  h.start_date = edf_field(std::string("01.01.20"), 8);
  h.start_time = edf_field(std::string("00.00.00"), 8);
  h.header_bytes = edf_field(static_cast<std::int64_t>(kEdfFixedHeaderBytes + signals.size() * kEdfSignalHeaderBytes), 8);
  h.reserved = edf_field(std::string(), 44);
  h.num_records = edf_field(records, 8);
  h.record_duration = edf_field(record_duration_s, 8);
  h.num_signals = edf_field(static_cast<std::int64_t>(signals.size()), 4);
  f.records = records;
  f.record_duration_s = record_duration_s;
  for (const auto& s : signals) {
    const auto& c = s.calibration;
    EdfSignalHeader sh;
    sh.label = edf_field(c.label, 16);
    sh.transducer = edf_field(std::string("AgAgCl electrode"), 80);
    sh.physical_dimension = edf_field(c.physical_dimension, 8);
    sh.physical_min = edf_field(c.physical_min, 8);
    sh.physical_max = edf_field(c.physical_max, 8);
    sh.digital_min = edf_field(c.digital_min, 8);
    sh.digital_max = edf_field(c.digital_max, 8);
    sh.prefiltering = edf_field(std::string(), 80);
    sh.samples_per_record = edf_field(c.samples_per_record, 8);
    sh.reserved = edf_field(std::string(), 32);
    if (s.digital.size() != static_cast<std::size_t>(records * c.samples_per_record))
      throw EdfError(EdfErrorCode::bad_field, "signal '" + c.label + "' sample count disagrees with records");
    f.signals.push_back(sh);
    f.samples.push_back(s.digital);
  }
  return f;
}

/// Calibrates the signals of a parsed file. Annotation signals are dropped
/// and listed in dropped_channels; units other than uV (or blank) are rejected.
inline RawRecording to_recording(const EdfFile& f, std::string session_id = {}) {
  RawRecording rec;
  rec.session_id = std::move(session_id);
  rec.duration_s = static_cast<double>(f.records) * f.record_duration_s;
  for (std::size_t s = 0; s < f.signals.size(); ++s) {
    const auto& sh = f.signals[s];
    const std::string label(edf_detail::trim(sh.label));
    if (label == kEdfAnnotationsLabel) {
      rec.dropped_channels.push_back(label);
      continue;
    }
    ChannelCalibration cal;
    cal.label = label;
    cal.physical_dimension = std::string(edf_detail::trim(sh.physical_dimension));
    std::string unit = cal.physical_dimension;
    std::transform(unit.begin(), unit.end(), unit.begin(), [](unsigned char c) { return std::tolower(c); });
    if (!unit.empty() && unit != "uv")
      throw EdfError(EdfErrorCode::unsupported_unit,
                     "signal '" + label + "' has unsupported physical dimension '" + cal.physical_dimension + "'");
    cal.physical_min = edf_detail::parse_real(sh.physical_min, "physical minimum");
    cal.physical_max = edf_detail::parse_real(sh.physical_max, "physical maximum");
    cal.digital_min = edf_detail::parse_int(sh.digital_min, "digital minimum");
    cal.digital_max = edf_detail::parse_int(sh.digital_max, "digital maximum");
    cal.samples_per_record = edf_detail::parse_int(sh.samples_per_record, "samples per record");
    cal.validate();
    Channel ch;
    ch.calibration = cal;
    ch.sample_rate_hz = static_cast<double>(cal.samples_per_record) / f.record_duration_s;
    ch.samples.reserve(f.samples[s].size());
    for (auto d : f.samples[s]) ch.samples.push_back(digital_to_physical(d, cal));
    rec.channels.push_back(std::move(ch));
  }
  return rec;
}

inline RawRecording parse_edf(std::span<const std::uint8_t> bytes, std::string session_id = {}) {
  return to_recording(read_edf(bytes), std::move(session_id));
}

/// Keeps the first 60 s of every channel.
inline RawRecording clip_first_minute(const RawRecording& rec) {
  constexpr double kMinute = 60.0;
  if (rec.duration_s < kMinute)
    throw EdfError(EdfErrorCode::too_short, "recording '" + rec.session_id + "' is shorter than 60 s (" +
                                                std::to_string(rec.duration_s) + " s)");
  RawRecording out = rec;
  out.duration_s = kMinute;
  for (auto& ch : out.channels) {
    const auto keep = static_cast<std::size_t>(std::llround(kMinute * ch.sample_rate_hz));
    if (ch.samples.size() < keep)
      throw EdfError(EdfErrorCode::too_short, "recording '" + rec.session_id + "' channel '" + ch.calibration.label +
                                                  "' has fewer than 60 s of samples");
    ch.samples.resize(keep);
  }
  return out;
}

}  // namespace dmmeeg
