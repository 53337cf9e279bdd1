// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "fnwl/dataio.hpp"
#include "fnwl/gradcheck_suite.hpp"
#include "fnwl/model_io.hpp"
#include "fnwl/random.hpp"

using namespace fnwl;

namespace {

RawRecording make_recording(const std::string& subject, std::size_t samples, double fs, std::uint64_t seed) {
  Rng rng(seed);
  RawRecording r;
  r.subject = subject;
  r.sample_rate_hz = fs;
  r.channels.assign(kRawChannels, std::vector<double>(samples));
  for (auto& ch : r.channels)
    for (double& v : ch) v = rng.normal();
  for (std::size_t t = 0; t < samples; ++t) r.labels.push_back(static_cast<int>(t / 40 % 5) - 1);
  return r;
}

std::string csv_text(const std::vector<RawRecording>& recs) {
  std::ostringstream out;
  write_raw_csv(out, recs);
  return out.str();
}

std::vector<RawRecording> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_raw_csv(in);
}

WindowDataset small_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  WindowDataset d;
  d.channels = 3;
  d.length = 5;
  d.stride = 2;
  d.sample_rate_hz = 5.2;
  std::vector<double> w(d.window_size());
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : w) v = rng.normal();
    d.push_back(w, static_cast<int>(rng.below(4)), "s" + std::to_string(i % 3));
  }
  return d;
}

// Minimum residual energy against span{F sin, F cos} at each class frequency,
// where F is the synthesizer's bandpass. Exact for noise-free data because F
// is linear.
int matched_subspace_class(std::span<const double> window, const SynthConfig& cfg, const SosFilter& filter) {
  int best = -1;
  double best_residual = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.classes; ++k) {
    const double w = 2.0 * std::numbers::pi * cfg.class_hz(k) / cfg.sample_rate_hz;
    std::vector<double> sin_part(cfg.length), cos_part(cfg.length);
    for (std::size_t t = 0; t < cfg.length; ++t) {
      sin_part[t] = std::sin(w * static_cast<double>(t));
      cos_part[t] = std::cos(w * static_cast<double>(t));
    }
    if (cfg.bandpass) {
      sin_part = filtfilt(filter, sin_part);
      cos_part = filtfilt(filter, cos_part);
    }
    double residual = 0.0;
    for (std::size_t c = 0; c < cfg.channels; ++c) {
      const auto y = window.subspan(c * cfg.length, cfg.length);
      double ss = 0, sc = 0, cc = 0, sy = 0, cy = 0, yy = 0;
      for (std::size_t t = 0; t < cfg.length; ++t) {
        ss += sin_part[t] * sin_part[t];
        sc += sin_part[t] * cos_part[t];
        cc += cos_part[t] * cos_part[t];
        sy += sin_part[t] * y[t];
        cy += cos_part[t] * y[t];
        yy += y[t] * y[t];
      }
      const double det = ss * cc - sc * sc;
      const double a = (cc * sy - sc * cy) / det;
      const double b = (ss * cy - sc * sy) / det;
      residual += yy - (a * sy + b * cy);
    }
    if (residual < best_residual) {
      best_residual = residual;
      best = k;
    }
  }
  return best;
}

class TempDir : public ::testing::Test {
 protected:
  std::filesystem::path dir;
  void SetUp() override {
    dir = std::filesystem::temp_directory_path() /
          ("fnwl_dataio_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir);
  }
  void TearDown() override { std::filesystem::remove_all(dir); }
};

template <typename Decode>
void fuzz_binary(const std::vector<std::uint8_t>& original, std::uint64_t seed, Decode decode_and_reencode) {
  Rng rng(seed);
  std::size_t rejected = 0, accepted = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto bytes = original;
    switch (rng.below(4)) {
      case 0:
        bytes[rng.below(bytes.size())] ^= static_cast<std::uint8_t>(1u << rng.below(8));
        break;
      case 1:
        bytes[rng.below(bytes.size())] = static_cast<std::uint8_t>(rng.below(256));
        break;
      case 2:
        bytes.resize(rng.below(bytes.size()));
        break;
      default:
        bytes.insert(bytes.begin() + static_cast<long>(rng.below(bytes.size() + 1)),
                     static_cast<std::uint8_t>(rng.below(256)));
    }
    try {
      const auto again = decode_and_reencode(bytes);
      EXPECT_EQ(again, bytes) << "trial " << trial << " decoded but does not re-encode identically";
      ++accepted;
    } catch (const FormatError&) {
      ++rejected;
    }
  }
  EXPECT_EQ(rejected + accepted, 1000u);
  EXPECT_GT(rejected, 900u);
}

}  // namespace

TEST(RawCsv, TwoSubjectsGiveTwoRecordings) {
  const auto text = csv_text({make_recording("alice", 300, 5.2, 1), make_recording("bob", 217, 5.2, 2)});
  const auto recs = parse(text);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].subject, "alice");
  EXPECT_EQ(recs[0].length(), 300u);
  EXPECT_EQ(recs[1].subject, "bob");
  EXPECT_EQ(recs[1].length(), 217u);
  for (const auto& r : recs) EXPECT_EQ(r.channels.size(), 8u);
}

TEST(RawCsv, ValuesSurviveRoundTrip) {
  const auto orig = make_recording("s1", 120, 5.2, 3);
  const auto recs = parse(csv_text({orig}));
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].channels, orig.channels);
  EXPECT_EQ(recs[0].labels, orig.labels);
}

TEST(RawCsv, InfersSampleRate) {
  const auto recs = parse(csv_text({make_recording("s1", 1000, 5.2, 4)}));
  EXPECT_NEAR(recs[0].sample_rate_hz, 5.2, 1e-6);
}

TEST(RawCsv, InterleavedSubjectsAndColumnOrder) {
  std::string text = "label,t,subject,c8,c7,c6,c5,c4,c3,c2,c1\n";
  for (int t = 0; t < 4; ++t)
    for (const char* s : {"a", "b"})
      text += std::to_string(t % 4) + "," + std::to_string(t * 0.5) + "," + s + ",8,7,6,5,4,3,2,1\n";
  const auto recs = parse(text);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].subject, "b");
  EXPECT_EQ(recs[0].labels, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_DOUBLE_EQ(recs[0].channels[0][2], 1.0);
  EXPECT_DOUBLE_EQ(recs[0].channels[7][2], 8.0);
  EXPECT_DOUBLE_EQ(recs[0].sample_rate_hz, 2.0);
}

TEST(RawCsv, MissingColumnNamed) {
  const std::string text = "subject,t,c1,c2,c3,c4,c5,c6,c7,label\nx,0,1,2,3,4,5,6,7,0\n";
  try {
    parse(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("c8"), std::string::npos) << e.what();
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(RawCsv, MalformedRowReportsLine) {
  auto text = csv_text({make_recording("s", 10, 5.2, 5)});
  // line 5 is the fourth data row
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) pos = text.find('\n', pos) + 1;
  text.replace(text.find(',', text.find(',', pos) + 1) + 1, 1, "x");
  try {
    parse(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5u) << e.what();
  }
}

TEST(RawCsv, RowErrors) {
  const std::string header = "subject,t,c1,c2,c3,c4,c5,c6,c7,c8,label\n";
  EXPECT_THROW(parse(header + "s,0,1,2,3,4,5,6,7,8\n"), ParseError);
  EXPECT_THROW(parse(header + "s,0,1,2,3,4,5,6,7,8,4\n"), ParseError);
  EXPECT_THROW(parse(header + "s,0,1,2,3,4,5,6,7,8,-2\n"), ParseError);
  EXPECT_THROW(parse(header + "s,0,1,2,3,4,5,6,7,nan,0\n"), ParseError);
  EXPECT_THROW(parse(header + "s,0,1,2,3,4,5,6,7,8,0\ns,0,1,2,3,4,5,6,7,8,0\n"), ParseError);
  EXPECT_THROW(parse(header + ",0,1,2,3,4,5,6,7,8,0\n"), ParseError);
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("subject,t,c1,c2,c3,c4,c5,c6,c7,c8,label,extra\n"), ParseError);
  EXPECT_THROW(parse("subject,t,c1,c1,c2,c3,c4,c5,c6,c7,c8,label\n"), ParseError);
}

TEST(RawCsv, NonUniformSamplingIsSchemaError) {
  const std::string header = "subject,t,c1,c2,c3,c4,c5,c6,c7,c8,label\n";
  const std::string row = ",1,2,3,4,5,6,7,8,0\n";
  EXPECT_THROW(parse(header + "s,0" + row + "s,1" + row + "s,2.1" + row), SchemaError);
  EXPECT_THROW(parse(header + "s,0" + row), SchemaError);
  EXPECT_NO_THROW(parse(header + "s,0" + row + "s,1" + row + "s,2.0000005" + row));
}

TEST(RawCsv, LabeledRowsAreNeverDropped) {
  std::vector<RawRecording> orig;
  for (int s = 0; s < 4; ++s) orig.push_back(make_recording("s" + std::to_string(s), 150 + 37 * s, 5.2, 10 + s));
  const auto text = csv_text(orig);
  std::size_t labeled_rows = 0;
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line))
    if (line.substr(line.rfind(',') + 1) != "-1") ++labeled_rows;

  std::size_t labeled_in_recordings = 0;
  for (const auto& r : parse(text))
    for (int y : r.labels) labeled_in_recordings += y != kUnlabeled;
  EXPECT_EQ(labeled_in_recordings, labeled_rows);
  EXPECT_GT(labeled_rows, 0u);
}

TEST(RawCsv, FuzzedInputNeverCrashes) {
  const auto original = csv_text({make_recording("a", 12, 5.2, 6), make_recording("b", 9, 5.2, 7)});
  Rng rng(2024);
  const std::string alphabet = "0123456789,.-+e\nabnx \r";
  std::size_t parsed = 0, rejected = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::string text = original;
    const auto edits = 1 + rng.below(3);
    for (std::uint64_t e = 0; e < edits; ++e) {
      const auto at = rng.below(text.size());
      switch (rng.below(3)) {
        case 0:
          text[at] = alphabet[rng.below(alphabet.size())];
          break;
        case 1:
          text.erase(at, 1);
          break;
        default:
          text.insert(at, 1, alphabet[rng.below(alphabet.size())]);
      }
    }
    try {
      for (const auto& r : parse(text)) {
        r.validate();
        EXPECT_TRUE(r.sample_rate_hz > 0.0 && std::isfinite(r.sample_rate_hz));
        for (int y : r.labels) EXPECT_TRUE(y >= kUnlabeled && y <= 3);
      }
      ++parsed;
    } catch (const ParseError&) {
      ++rejected;
    } catch (const SchemaError&) {
      ++rejected;
    }
  }
  EXPECT_EQ(parsed + rejected, 1000u);
}

TEST_F(TempDir, WindowsWriteReadWriteIsByteIdentical) {
  const auto d = small_dataset(25, 1);
  write_windows(d, dir / "a.fnwin");
  const auto back = read_windows(dir / "a.fnwin");
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.subjects, d.subjects);
  EXPECT_EQ(back.stride, d.stride);
  EXPECT_EQ(back.sample_rate_hz, d.sample_rate_hz);
  write_windows(back, dir / "b.fnwin");
  EXPECT_EQ(binary::read_file(dir / "a.fnwin"), binary::read_file(dir / "b.fnwin"));
}

TEST_F(TempDir, WindowsHeaderLayout) {
  const auto d = small_dataset(2, 2);
  const auto bytes = encode_windows(d);
  ASSERT_EQ(bytes.size(), 5u + 1 + 4 + 4 + 4 + 8 + 2 * (1 + 4 * 15) + 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "FNWIN");
  EXPECT_EQ(bytes[5], 1);
  EXPECT_EQ(bytes[6], 2);   // N
  EXPECT_EQ(bytes[10], 3);  // C
  EXPECT_EQ(bytes[14], 5);  // L
  double rate = 0;
  std::memcpy(&rate, bytes.data() + 18, 8);
  EXPECT_EQ(rate, 5.2);
  EXPECT_EQ(bytes[26], d.labels[0]);
  float first = 0;
  std::memcpy(&first, bytes.data() + 27, 4);
  EXPECT_EQ(first, static_cast<float>(d.values[0]));
}

TEST_F(TempDir, WindowsReadWithoutSidecar) {
  const auto d = small_dataset(4, 3);
  write_windows(d, dir / "a.fnwin");
  std::filesystem::remove(dir / "a.fnwin.json");
  const auto back = read_windows(dir / "a.fnwin");
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.subjects, std::vector<std::string>(4));
}

TEST(WindowsFile, FlippedPayloadByteFailsCrc) {
  auto bytes = encode_windows(small_dataset(10, 4));
  bytes[100] ^= 0x01;
  try {
    decode_windows(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("CRC"), std::string::npos) << e.what();
  }
}

TEST(WindowsFile, StructuralErrors) {
  const auto good = encode_windows(small_dataset(3, 5));
  auto bad_magic = good;
  bad_magic[1] = 'X';
  EXPECT_THROW(decode_windows(bad_magic), FormatError);
  auto bad_version = good;
  bad_version[5] = 2;
  EXPECT_THROW(decode_windows(bad_version), FormatError);
  EXPECT_THROW(decode_windows(std::span(good).first(good.size() - 1)), FormatError);
  EXPECT_THROW(decode_windows(std::span(good).first(3)), FormatError);
  EXPECT_THROW(decode_windows(std::vector<std::uint8_t>{}), FormatError);
  auto padded = good;
  padded.push_back(0);
  EXPECT_THROW(decode_windows(padded), FormatError);
}

TEST(WindowsFile, LabelAboveClassCountRejected) {
  auto d = small_dataset(3, 6);
  d.labels[1] = 5;
  const auto bytes = encode_windows(d);
  EXPECT_THROW(decode_windows(bytes, 4), FormatError);
  EXPECT_NO_THROW(decode_windows(bytes, 6));
}

TEST(WindowsFile, TenThousandWindowsWithinQuantizationBound) {
  Rng rng(7);
  WindowDataset d;
  d.channels = 8;
  d.length = 16;
  d.stride = 3;
  d.sample_rate_hz = 5.2;
  std::vector<double> w(d.window_size());
  for (std::size_t i = 0; i < 10000; ++i) {
    for (double& v : w) v = rng.normal() * std::exp(rng.uniform(-10.0, 10.0));
    d.push_back(w, static_cast<int>(i % 4));
  }
  const auto back = decode_windows(encode_windows(d));
  ASSERT_EQ(back.values.size(), d.values.size());
  EXPECT_EQ(back.labels, d.labels);
  // round-to-nearest f32: |error| <= 2^-24 |x| for normal-range values
  for (std::size_t k = 0; k < d.values.size(); ++k)
    ASSERT_LE(std::abs(back.values[k] - d.values[k]), std::ldexp(std::abs(d.values[k]), -24)) << k;
}

TEST(WindowsFile, FuzzedFilesRejectedOrExact) {
  fuzz_binary(encode_windows(small_dataset(6, 8)), 11,
              [](const std::vector<std::uint8_t>& b) { return encode_windows(decode_windows(b)); });
}

TEST(WeightsFile, FuzzedFilesRejectedOrExact) {
  const auto cfg = gradcheck_suite::tiny_config();
  fuzz_binary(encode_weights(build_model(cfg, 3)), 12,
              [&](const std::vector<std::uint8_t>& b) { return encode_weights(decode_weights(b, cfg)); });
}

TEST(Synth, DeterministicPerSeed) {
  SynthConfig cfg;
  cfg.windows_per_class = 10;
  const auto a = synth_generate(cfg);
  const auto b = synth_generate(cfg);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.labels, b.labels);
  cfg.seed = 43;
  EXPECT_NE(synth_generate(cfg).values, a.values);
}

TEST(Synth, ShapeAndUniformHistogram) {
  SynthConfig cfg;
  cfg.windows_per_class = 37;
  const auto d = synth_generate(cfg);
  d.validate();
  EXPECT_EQ(d.size(), 148u);
  EXPECT_EQ(d.channels, 8u);
  EXPECT_EQ(d.length, 150u);
  EXPECT_EQ(d.sample_rate_hz, 5.2);
  std::array<int, 4> hist{};
  for (int y : d.labels) ++hist[static_cast<std::size_t>(y)];
  for (int h : hist) EXPECT_EQ(h, 37);
}

TEST(Synth, NoiseFreeClassesSeparableByMatchedDetector) {
  SynthConfig cfg;
  cfg.snr_db = std::numeric_limits<double>::infinity();
  const auto d = synth_generate(cfg);
  const auto filter = design_butterworth_bandpass(cfg.filter_order, cfg.low_hz, cfg.high_hz, cfg.sample_rate_hz);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) correct += matched_subspace_class(d.window(i), cfg, filter) == d.labels[i];
  EXPECT_EQ(correct, d.size());
}

TEST(Synth, UnfilteredNoiseFreeWindowIsPureTone) {
  SynthConfig cfg;
  cfg.windows_per_class = 1;
  cfg.bandpass = false;
  cfg.snr_db = std::numeric_limits<double>::infinity();
  const auto d = synth_generate(cfg);
  Rng rng(cfg.seed);
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t c = 0; c < 8; ++c) {
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double w = 2.0 * std::numbers::pi * 0.3 * static_cast<double>(i + 1) / 5.2;
      for (std::size_t t = 0; t < 150; ++t)
        ASSERT_NEAR(d.window(i)[c * 150 + t], std::sin(w * static_cast<double>(t) + phase), 1e-12);
    }
}

TEST(Synth, NoiseLevelMatchesSnr) {
  SynthConfig cfg;
  cfg.bandpass = false;
  cfg.snr_db = 10.0;
  cfg.windows_per_class = 20;
  const auto noisy = synth_generate(cfg);
  // unit-amplitude tone carries power 0.5; 10 dB adds noise of variance 0.05
  double total = 0.0;
  for (double v : noisy.values) total += v * v;
  const double power = total / static_cast<double>(noisy.values.size());
  EXPECT_NEAR(power, 0.5 + 0.05, 0.01);
}

TEST(Synth, ParameterErrors) {
  SynthConfig cfg;
  cfg.classes = 9;  // 2.7 Hz > 2.6 Hz Nyquist
  EXPECT_THROW(synth_generate(cfg), ParameterError);
  cfg = {};
  cfg.windows_per_class = 0;
  EXPECT_THROW(synth_generate(cfg), ParameterError);
  cfg = {};
  cfg.snr_db = std::nan("");
  EXPECT_THROW(synth_generate(cfg), ParameterError);
  cfg = {};
  cfg.classes = 8;  // 2.4 Hz is still below Nyquist
  EXPECT_NO_THROW(synth_generate(cfg));
}
