#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "knock/error.hpp"
#include "knock/mapping.hpp"
#include "knock/simulator.hpp"
#include "knock/traces.hpp"

using namespace knock;

namespace {

Trace parse(const std::string& text) {
  std::istringstream in(text);
  return read_trace(in, "mem");
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Usage;
}

}  // namespace

TEST_CASE("trace round trip") {
  const auto spec = load_preset("pixel3a");
  auto t = generate_trace(spec, LatencyModel{}, GenConfig{1000, 1});
  t = classify(t, 200.0, true);
  std::stringstream buf;
  write_trace(t, buf);
  CHECK(buf.str().rfind("# knock-trace v1 width=36\n", 0) == 0);
  CHECK(read_trace(buf) == t);
}

TEST_CASE("record forms") {
  const auto t = parse(
      "# knock-trace v1 width=16\n"
      "# comment\n"
      "0x10,0x20,180\n"
      "\n"
      "0x10,0x30,,C\n"
      "0x10,0x40,233,N\n");
  REQUIRE(t.records.size() == 3);
  CHECK(t.records[0].latency == 180u);
  CHECK_FALSE(t.records[0].label);
  CHECK_FALSE(t.records[1].latency);
  CHECK(t.records[1].is_conflict());
  CHECK(t.records[2].label == Label::no_conflict);
  CHECK(t.records[2].difference().bits() == 0x50);

  // probe requests leave latency and label empty
  const auto probe = parse("# knock-trace v1 width=16\n0x10,0x30,\n");
  CHECK_FALSE(probe.records[0].latency);
  CHECK_FALSE(probe.records[0].label);
}

TEST_CASE("parse errors name the line") {
  try {
    parse("# knock-trace v1 width=16\n0x1,0x2,100\n0x1,0x2,abc\n");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find("mem:3") != std::string::npos);
  }
  CHECK(kind_of([] { parse("0x1,0x2,100\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([] { parse("# knock-trace v1 width=16\n0x1,0x2\n"); }) == ErrorKind::Parse);
  // empty latency and label is a probe request, not an error
  CHECK(parse("# knock-trace v1 width=16\n0x1,0x2,,\n").records.size() == 1);
  CHECK(kind_of([] { parse("# knock-trace v1 width=16\n0x1,0x2,5,X\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([] { parse("# knock-trace v1 width=8\n0x100,0x2,5\n"); }) ==
        ErrorKind::WidthMismatch);
  CHECK(kind_of([] { read_trace(std::string("/nonexistent/x.trace")); }) == ErrorKind::Io);
}

TEST_CASE("threshold on a noiseless open-page trace") {
  const auto spec = load_preset("rpi3b+");
  const auto t = generate_trace(spec, LatencyModel{}, GenConfig{10000, 2});
  const auto lat = latencies_of(t);
  const auto rep = find_threshold(lat);
  CHECK(rep.bimodal);
  CHECK(rep.threshold > 180);
  CHECK(rep.threshold < 220);
  CHECK(rep.low_mean == doctest::Approx(175).epsilon(0.01));
  CHECK(rep.high_mean == doctest::Approx(230).epsilon(0.01));
  CHECK(rep.separation_score > 0.9);
  CHECK(rep.samples == 10000);

  // every pair is labeled correctly
  const auto labeled = classify(t, rep.threshold);
  for (const auto& r : labeled.records) CHECK(r.is_conflict() == is_conflict(spec, r.a, r.b));
}

TEST_CASE("threshold misclassification tracks theta") {
  const auto spec = load_preset("rpi3b+");
  LatencyModel model{};
  model.theta = 0.05;
  const auto t = generate_trace(spec, model, GenConfig{100000, 3});
  const auto rep = find_threshold(latencies_of(t));
  const auto labeled = classify(t, rep.threshold);
  std::size_t wrong = 0;
  for (const auto& r : labeled.records) wrong += r.is_conflict() != is_conflict(spec, r.a, r.b);
  const double rate = static_cast<double>(wrong) / t.records.size();
  CHECK(rate > 0.04);
  CHECK(rate < 0.06);
}

TEST_CASE("single distributions are rejected") {
  const auto spec = load_preset("rpi3b+");
  LatencyModel model{};
  model.closed_page = true;
  const auto t = generate_trace(spec, model, GenConfig{10000, 4});
  try {
    find_threshold(latencies_of(t));
    FAIL("expected NoBimodalDistribution");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoBimodalDistribution);
    CHECK(std::string(e.what()).find("single distribution") != std::string::npos);
  }
  const std::vector<std::uint32_t> flat(1000, 200);
  CHECK(kind_of([&] { find_threshold(flat); }) == ErrorKind::NoBimodalDistribution);
  CHECK_FALSE(analyze_threshold(flat).bimodal);
  const std::vector<std::uint32_t> few(10, 200);
  CHECK(kind_of([&] { find_threshold(few); }) == ErrorKind::InsufficientData);
}

TEST_CASE("threshold is scale equivariant") {
  const auto t = generate_trace(load_preset("pixel3a"), LatencyModel{}, GenConfig{5000, 5});
  const auto lat = latencies_of(t);
  std::vector<std::uint32_t> scaled;
  for (auto v : lat) scaled.push_back(v * 3);
  const auto r1 = find_threshold(lat), r3 = find_threshold(scaled);
  for (std::size_t i = 0; i < lat.size(); ++i) {
    CHECK((lat[i] > r1.threshold) == (scaled[i] > r3.threshold));
  }
}

TEST_CASE("classification boundary is strict") {
  Trace t{8, {}};
  t.records.push_back({BitVector(8, 1), BitVector(8, 2), 200, std::nullopt});
  t.records.push_back({BitVector(8, 1), BitVector(8, 3), 201, std::nullopt});
  t.records.push_back({BitVector(8, 1), BitVector(8, 4), 150, Label::conflict});
  const auto kept = classify(t, 200.0);
  CHECK(kept.records[0].label == Label::no_conflict);
  CHECK(kept.records[1].label == Label::conflict);
  CHECK(kept.records[2].label == Label::conflict);  // existing labels stay
  CHECK(classify(t, 200.0, true).records[2].label == Label::no_conflict);
}

TEST_CASE("histogram") {
  const std::vector<std::uint32_t> lat{170, 171, 171, 230};
  const auto h = latency_histogram(lat);
  std::size_t total = 0;
  for (const auto& bin : h) total += bin.count;
  CHECK(total == 4);
  std::ostringstream out;
  write_histogram(lat, out);
  CHECK_FALSE(out.str().empty());
}
