#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ftnn/data.hpp"

using namespace ftnn;

namespace {
Dataset parse(const std::string& text, const CsvSchema& schema) {
  std::istringstream is(text);
  return parse_csv(is, schema, "t");
}
std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("ftnn_test_" + name)).string();
}
}  // namespace

TEST_CASE("three-row CSV round-trips exactly") {
  const auto ds = parse("a,b,y\n1.5,-2,0.25\n0,3e-3,1\n7,8,\"9\"\n", {{"a", "b"}, {"y"}, std::nullopt});
  REQUIRE(ds.size() == 3);
  CHECK(ds.inputs[0] == std::vector<double>{1.5, -2.0});
  CHECK(ds.inputs[1] == std::vector<double>{0.0, 3e-3});
  CHECK(ds.targets[2] == std::vector<double>{9.0});
  CHECK(ds.stats.input_bound == 8.0);
}

TEST_CASE("CSV errors carry their location") {
  const CsvSchema s{{"a"}, {"y"}, std::nullopt};
  try {
    parse("a,y\n1,2\n3,\n", s);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);
    CHECK(e.column() == "y");
  }
  try {
    parse("a,y\n1,2\nx,4\n", s);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);
    CHECK(e.column() == "a");
  }
  try {
    parse("a,z\n1,2\n", s);
    FAIL("expected MissingColumnError");
  } catch (const MissingColumnError& e) {
    CHECK(e.column() == "y");
  }
  CHECK_THROWS_AS(parse("", s), EmptyFileError);
  try {
    load_csv("/nonexistent/dir/iris.csv", s);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(e.path() == "/nonexistent/dir/iris.csv");
  }
}

TEST_CASE("label map keeps two classes") {
  std::string text = "sl,sw,pl,pw,species\n";
  for (int i = 0; i < 50; ++i) text += "5.1,3.5,1.4,0.2,setosa\n";
  for (int i = 0; i < 50; ++i) text += "7.0,3.2,4.7,1.4,versicolor\n";
  for (int i = 0; i < 50; ++i) text += "6.3,3.3,6.0,2.5,virginica\n";
  CsvSchema s{{"sl", "sw", "pl", "pw"}, {}, CsvSchema::LabelMap{"species", {{"setosa", 0.0}, {"versicolor", 1.0}}}};
  const auto ds = parse(text, s);
  CHECK(ds.size() == 100);
  CHECK(ds.input_size() == 4);
  CHECK(ds.output_size() == 1);
  CHECK(ds.targets.front()[0] == 0.0);
  CHECK(ds.targets.back()[0] == 1.0);
}

TEST_CASE("save then load is exact") {
  const Dataset ds = gen_linreg(9, 25, 0.3, {0.1, 1e-7, -3.0});
  const auto path = tmp_path("roundtrip.csv");
  save_csv(path, ds, default_schema(ds));
  const auto back = load_csv(path, default_schema(ds));
  CHECK(back.inputs == ds.inputs);
  CHECK(back.targets == ds.targets);
  std::filesystem::remove(path);
}

TEST_CASE("normalize") {
  const Dataset ds = make_dataset("n", {{0.0, 2.0}, {5.0, 2.0}, {10.0, 2.0}}, {{0.0}, {1.0}, {0.0}});
  const Dataset n = normalize(ds, Normalization::MinMaxUnit);
  CHECK(n.inputs[0][0] == 0.0);
  CHECK(n.inputs[1][0] == 0.5);
  CHECK(n.inputs[2][0] == 1.0);
  for (const auto& x : n.inputs) CHECK(x[1] == 0.0);
  CHECK(!n.warnings.empty());
  CHECK(n.stats.input_bound == 1.0);
  const Dataset twice = normalize(n, Normalization::MinMaxUnit);
  CHECK(twice.inputs == n.inputs);
  const Dataset unit = make_dataset("u", {{0.0, 1.0}, {1.0, 0.0}, {0.25, 0.5}}, {{0.0}, {1.0}, {0.0}});
  CHECK(normalize(unit, Normalization::MinMaxUnit).inputs == unit.inputs);
  CHECK(normalize(ds, Normalization::None).inputs == ds.inputs);
}

TEST_CASE("split") {
  const Dataset ds = gen_linreg(1, 100, 0.0, {1.0, 2.0});
  auto [tr, te] = split(ds, 7);
  CHECK(tr.size() == 80);
  CHECK(te.size() == 20);
  auto [tr2, te2] = split(ds, 7);
  CHECK(tr.inputs == tr2.inputs);
  CHECK(te.inputs == te2.inputs);
  auto all = tr.inputs;
  all.insert(all.end(), te.inputs.begin(), te.inputs.end());
  auto orig = ds.inputs;
  std::sort(all.begin(), all.end());
  std::sort(orig.begin(), orig.end());
  CHECK(all == orig);
  for (const auto& x : te.inputs) CHECK(std::find(tr.inputs.begin(), tr.inputs.end(), x) == tr.inputs.end());

  auto [a, b] = split(gen_linreg(1, 5, 0.0, {1.0}), 3);
  CHECK(a.size() == 4);
  CHECK(b.size() == 1);
  CHECK_THROWS(split(gen_linreg(1, 4, 0.0, {1.0}), 3));
}

TEST_CASE("generators") {
  const Dataset lin = gen_linreg(2, 30, 0.0, {0.5, -0.3});
  for (std::size_t s = 0; s < lin.size(); ++s) {
    CHECK(lin.targets[s][0] == 0.5 * lin.inputs[s][0] + -0.3 * lin.inputs[s][1]);
    for (double v : lin.inputs[s]) {
      CHECK(v >= 0.0);
      CHECK(v < 1.0);
    }
  }
  const Dataset same = gen_blobs(4, 400, 0.0, 4);
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t s = 0; s < same.size(); ++s) (same.targets[s][0] == 0.0 ? m0 : m1) += same.inputs[s][0] / 400.0;
  CHECK(std::abs(m0 - m1) < 0.3);
  const Dataset sep = gen_blobs(4, 50, 5.0, 4);
  CHECK(sep.size() == 100);
  CHECK(sep.input_size() == 4);
  CHECK(gen_blobs(4, 50, 5.0, 4).inputs == sep.inputs);
  CHECK_THROWS(gen_blobs(4, 0, 5.0, 4));
}

TEST_CASE("dataset validation and stats sidecar") {
  CHECK_THROWS_AS(make_dataset("x", {{1.0}}, {}), ShapeError);
  CHECK_THROWS(make_dataset("x", {{std::nan("")}}, {{1.0}}));
  std::ostringstream os;
  write_stats_kv(os, make_dataset("x", {{1.0, -3.0}}, {{1.0}}));
  CHECK(os.str().find("input_bound = 3") != std::string::npos);
}
