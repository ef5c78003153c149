#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "nnsub/error.hpp"
#include "nnsub/io.hpp"
#include "oracles/reference.hpp"

using namespace nnsub;
using namespace nnsub::io;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "nnsub_io_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("matrix text round trip is exact") {
    std::mt19937_64 rng(1);
    const Matrix m = oracle::random_normal(4, 3, rng) * 1e-7;
    const Matrix back = parse_matrix(format_matrix(m));
    CHECK(back == m);
    write_matrix(scratch("m.csv"), m);
    CHECK(read_matrix(scratch("m.csv")) == m);
  }

  TEST_CASE("matrix header and body checks") {
    CHECK(parse_matrix("# rows=2 cols=2\n1 2\n3,4\n")(1, 0) == 3.0);
    CHECK_THROWS_AS(parse_matrix("1,2\n"), ParseError);
    CHECK_THROWS_AS(parse_matrix("# rows=2 cols=2\n1,2\n3\n"), ParseError);
    CHECK_THROWS_AS(parse_matrix("# rows=2 cols=2\n1,2\n"), ParseError);
    CHECK_THROWS_AS(read_matrix(scratch("does_not_exist.csv")), IoError);
  }

  TEST_CASE("features round trip with class names") {
    FeatureDataset d = make_gaussian_classes(5, 3, 2, 4.0, 2);
    d.class_names = {"normal", "pneumonia"};
    save_features(scratch("f.csv"), d);
    const FeatureDataset back = load_features(scratch("f.csv"));
    CHECK(back.features == d.features);
    CHECK(back.labels == d.labels);
    CHECK(back.class_names == d.class_names);
  }

  TEST_CASE("feature map round trip") {
    FeatureMapStack f;
    f.channels = 2;
    f.height = 2;
    f.width = 3;
    f.data = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    const FeatureMapStack back = parse_feature_map(format_feature_map(f));
    CHECK(back.data == f.data);
    CHECK(back.at(1, 0, 2) == 9.0);
    CHECK_THROWS_AS(parse_feature_map("# channels=2 height=2 width=3\n1,2,3\n"), ParseError);
  }

  TEST_CASE("model json round trip keeps every field") {
    std::mt19937_64 rng(3);
    const Matrix X = oracle::random_uniform(6, 6, rng);
    const std::vector<int> labels{0, 1, 0, 1, 0, 1};
    SolverOptions o;
    o.iters = 20;
    o.seed = 42;
    for (const FactorModel& m : {dnmf_fit(NonNegMatrix::checked(X), LabelMatrix(labels, 2), 2, 0.7, o),
                                 scnmfs_fit(NonNegMatrix::checked(X), LabelMatrix(labels, 2), 2, 0.2, o),
                                 truncated_svd(X, 3)}) {
      json j = model_to_json(m);
      j["config"] = {{"note", "ignored"}};
      const FactorModel back = model_from_json(json::parse(j.dump()));
      CHECK(back.method == m.method);
      CHECK(back.U == m.U);
      CHECK(back.V == m.V);
      CHECK(back.A.has_value() == m.A.has_value());
      CHECK(back.Z.has_value() == m.Z.has_value());
      if (m.A) CHECK(*back.A == *m.A);
      if (m.Z) CHECK(*back.Z == *m.Z);
      if (m.sigma) CHECK(*back.sigma == *m.sigma);
      CHECK(back.objective_trace == m.objective_trace);
      CHECK(back.seed == m.seed);
      CHECK(back.hyper.alpha == m.hyper.alpha);
    }
    CHECK_THROWS_AS(model_from_json(json::parse(R"({"method":"nmf"})")), ParseError);
    write_text(scratch("bad.json"), "{not json");
    CHECK_THROWS_AS(load_model(scratch("bad.json")), ParseError);
  }

  TEST_CASE("report json and tsv") {
    EvalReport r;
    r.per_run_accuracy = {0.5, 1.0};
    r.mean = 0.75;
    r.std = 0.25;
    r.config.method = Method::SCNMFS;
    r.config.seed = 7;
    const json j = report_to_json(r);
    CHECK(j.at("per_run_accuracy").size() == 2);
    CHECK(j.at("config_echo").at("method") == "scnmfs");
    CHECK(j.at("config_echo").at("seed") == 7);
    const std::string tsv = report_to_tsv(r);
    CHECK(tsv.rfind("scnmfs\t30\tknn\t5\t2\t7\t", 0) == 0);
    const std::string header = report_tsv_header();
    CHECK(std::count(header.begin(), header.end(), '\t') == std::count(tsv.begin(), tsv.end(), '\t'));
  }

  TEST_CASE("pgm header") {
    Matrix v(2, 3);
    v << 0, 0.5, 1, 1, 0.5, 0;
    write_pgm(scratch("m.pgm"), v);
    const std::string text = read_text(scratch("m.pgm"));
    CHECK(text.rfind("P5\n3 2\n255\n", 0) == 0);
    CHECK(text.size() == std::strlen("P5\n3 2\n255\n") + 6);
    CHECK(static_cast<unsigned char>(text.back()) == 0);
    CHECK(static_cast<unsigned char>(text[text.size() - 4]) == 255);
  }
}
