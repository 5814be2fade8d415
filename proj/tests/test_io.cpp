#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "conformal/evaluate.hpp"
#include "conformal/run.hpp"
#include "conformal/svg.hpp"

using namespace conformal;

namespace {

struct TempFile {
  std::filesystem::path path;

  explicit TempFile(const std::string& name, const std::string& content) {
    path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
  }
  ~TempFile() { std::filesystem::remove(path); }
};

const char* kCsv =
    "x1,x2,start,end\n"
    "0.0,1.0,1.0,2.0\n"
    "1.0,0.5,2.0,3.0\n"
    "2.0,1.5,3.0,4.0\n"
    "3.0,1.0,4.0,5.0\n"
    "4.0,0.0,5.0,6.0\n";

std::string fd_doc(int n, int q, int len) {
  json doc;
  doc["schema"] = "conformal-fd/1";
  json grids = json::array();
  for (int j = 0; j < q; ++j) {
    json g = json::array();
    for (int t = 0; t < len; ++t) g.push_back(static_cast<double>(t));
    grids.push_back(g);
  }
  doc["grids"] = grids;
  json y = json::array();
  for (int i = 0; i < n; ++i) {
    json obs = json::array();
    for (int j = 0; j < q; ++j) {
      json c = json::array();
      for (int t = 0; t < len; ++t) c.push_back(0.5 * i + 0.1 * t + 0.01 * j);
      obs.push_back(c);
    }
    y.push_back(obs);
  }
  doc["y"] = y;
  return doc.dump();
}

}  // namespace

TEST_CASE("ingest_tabular routes columns by name") {
  TempFile f("cfio_basic.csv", kCsv);
  const auto input = ingest_tabular(f.path.string(), "start,end");
  CHECK(input.train.n() == 5);
  CHECK(input.train.p() == 2);
  CHECK(input.train.q() == 2);
  CHECK(input.x0.rows() == 0);
  CHECK(input.feature_names == std::vector<std::string>{"x1", "x2"});
  CHECK(input.train.y(0, 0) == 1.0);
  CHECK(input.train.y(4, 1) == 6.0);
}

TEST_CASE("ingest_tabular splits off rows flagged as test") {
  TempFile f("cfio_test.csv",
             "a,b,test\n"
             "0,1,0\n"
             "1,2,0\n"
             "2,3,0\n"
             "3,4,1\n");
  const auto input = ingest_tabular(f.path.string(), "b");
  CHECK(input.train.n() == 3);
  CHECK(input.x0.rows() == 1);
  CHECK(input.x0(0, 0) == 3.0);
  CHECK(input.y0(0, 0) == 4.0);
}

TEST_CASE("ingest_tabular guards") {
  TempFile f("cfio_guard.csv", kCsv);
  CHECK_THROWS_MATCHES(ingest_tabular(f.path.string(), "missing"), error,
                       Catch::Matchers::Predicate<error>(
                           [](const error& e) { return e.code() == errc::missing_column; }));

  TempFile bad("cfio_bad.csv",
               "a,b\n"
               "0,1\n"
               "1,2\n"
               "2,abc\n");
  try {
    ingest_tabular(bad.path.string(), "b");
    FAIL("expected ParseError");
  } catch (const error& e) {
    CHECK(e.code() == errc::parse_error);
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("ingest_functional accepts a well-formed document") {
  TempFile f("cfio_fd.json", fd_doc(2, 1, 3));
  const auto input = ingest_functional(f.path.string());
  CHECK(input.y.n() == 2);
  CHECK(input.y.q() == 1);
  CHECK(input.y.grids[0].size() == 3);
  CHECK_FALSE(input.x.has_value());
  CHECK(input.x0.empty());
}

TEST_CASE("ingest_functional guards") {
  // evaluation vector longer than its grid
  json doc = json::parse(fd_doc(2, 1, 3));
  doc["y"][1][0].push_back(9.0);
  TempFile f1("cfio_fd_bad1.json", doc.dump());
  CHECK_THROWS_MATCHES(ingest_functional(f1.path.string()), error,
                       Catch::Matchers::Predicate<error>(
                           [](const error& e) { return e.code() == errc::grid_mismatch; }));

  json nogrids = json::parse(fd_doc(2, 1, 3));
  nogrids.erase("grids");
  TempFile f2("cfio_fd_bad2.json", nogrids.dump());
  CHECK_THROWS_MATCHES(ingest_functional(f2.path.string()), error,
                       Catch::Matchers::Predicate<error>(
                           [](const error& e) { return e.code() == errc::schema_error; }));

  TempFile f3("cfio_fd_bad3.json", "{not json");
  CHECK_THROWS_MATCHES(ingest_functional(f3.path.string()), error,
                       Catch::Matchers::Predicate<error>(
                           [](const error& e) { return e.code() == errc::schema_error; }));
}

TEST_CASE("infinite bounds survive the json round trip") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(jnum(inf) == json("inf"));
  CHECK(jnum(-inf) == json("-inf"));
  CHECK(jnum(1.5) == json(1.5));
  CHECK(std::isinf(jnum_back(jnum(inf))));
  CHECK(jnum_back(jnum(-inf)) < 0);
  CHECK(jnum_back(jnum(0.25)) == 0.25);
}

TEST_CASE("run emits a deterministic document") {
  TempFile data("cfio_run.csv",
                "x,y,test\n"
                "0,0.1,0\n"
                "1,1.9,0\n"
                "2,4.2,0\n"
                "3,5.8,0\n"
                "4,8.1,0\n"
                "5,9.7,0\n"
                "6,12.3,0\n"
                "7,13.8,0\n"
                "2.5,5.0,1\n");
  RunConfig cfg;
  cfg.mode = "multi";
  cfg.method = "split";
  cfg.model = "ols";
  cfg.alpha = 0.25;
  cfg.seed = 31;
  cfg.input = data.path.string();
  cfg.response_cols = "y";
  const auto a = run(cfg);
  const auto b = run(cfg);
  CHECK(a.dump() == b.dump());
  CHECK(a["schema"] == "conformal-result/1");
  CHECK(a["config"]["seed"] == 31);
  CHECK(a["lo"][0][0].get<double>() < a["up"][0][0].get<double>());

  // the echoed configuration reproduces the run
  RunConfig echoed = cfg;
  echoed.alpha = a["config"]["alpha"].get<double>();
  echoed.seed = a["config"]["seed"].get<std::uint64_t>();
  CHECK(run(echoed).dump() == a.dump());
}

TEST_CASE("plots render for each result family") {
  TempFile data("cfio_plot.csv",
                "x,u,v,test\n"
                "0,0.1,1.1,0\n"
                "1,1.9,0.8,0\n"
                "2,4.2,1.3,0\n"
                "3,5.8,0.9,0\n"
                "4,8.1,1.2,0\n"
                "5,9.7,1.0,0\n"
                "2.5,5.0,1.0,1\n");
  RunConfig cfg;
  cfg.mode = "multi";
  cfg.method = "split";
  cfg.alpha = 0.3;
  cfg.seed = 5;
  cfg.input = data.path.string();
  cfg.response_cols = "u,v";
  const auto split_doc = run(cfg);
  const std::string split_svg = render_svg(split_doc);
  CHECK(split_svg.find("<svg") != std::string::npos);
  CHECK(split_svg.find("intervals, component 2") != std::string::npos);

  cfg.method = "full";
  cfg.grid_pts = 8;
  const auto full_doc = run(cfg);
  const std::string full_svg = render_svg(full_doc);
  CHECK(full_svg.find("full conformal p-values") != std::string::npos);
  CHECK(full_svg.find("<rect") != std::string::npos);

  TempFile fdata("cfio_plot_fd.json", fd_doc(6, 2, 5));
  RunConfig fcfg;
  fcfg.mode = "fd";
  fcfg.method = "split";
  fcfg.model = "mean";
  fcfg.alpha = 0.3;
  fcfg.seed = 2;
  fcfg.input = fdata.path.string();
  const auto fd_res = run(fcfg);
  const std::string fd_svg = render_svg(fd_res);
  // one stacked panel per response component
  CHECK(fd_svg.find("component 1") != std::string::npos);
  CHECK(fd_svg.find("component 2") != std::string::npos);

  json empty;
  CHECK_THROWS_MATCHES(render_svg(empty), error,
                       Catch::Matchers::Predicate<error>(
                           [](const error& e) { return e.code() == errc::unsupported_result; }));
}

TEST_CASE("full conformal handles a 300-per-dimension grid on two components") {
  std::mt19937_64 gen(67);
  std::string csv = "x,u,v,test\n";
  for (int i = 0; i < 10; ++i) {
    const double x = standard_normal(gen);
    csv += std::to_string(x) + "," + std::to_string(2 * x + 0.3 * standard_normal(gen)) + "," +
           std::to_string(-x + 0.3 * standard_normal(gen)) + ",0\n";
  }
  csv += "0.2,0.4,-0.2,1\n";
  TempFile data("cfio_full300.csv", csv);
  RunConfig cfg;
  cfg.mode = "multi";
  cfg.method = "full";
  cfg.model = "mean";
  cfg.grid_pts = 300;
  cfg.input = data.path.string();
  cfg.response_cols = "u,v";
  const auto doc = run(cfg);
  CHECK(doc["pvals"][0].size() == 300u * 300u);
  CHECK(doc["axes"][0].size() == 300u);
}

TEST_CASE("evaluate on a degenerate dataset reaches full coverage at size zero") {
  TempFile data("cfio_eval_const.csv",
                "x,y\n"
                "0,5\n"
                "1,5\n"
                "2,5\n"
                "3,5\n"
                "4,5\n"
                "5,5\n"
                "6,5\n"
                "7,5\n"
                "8,5\n"
                "9,5\n");
  RunConfig cfg;
  cfg.mode = "multi";
  cfg.method = "split";
  cfg.model = "mean";
  cfg.alpha = 0.25;
  cfg.seed = 7;
  cfg.s_type = modulation_kind::identity;
  cfg.input = data.path.string();
  cfg.response_cols = "y";
  const auto report = evaluate(cfg);
  CHECK(report.coverage == 1.0);
  CHECK(report.avg_size == 0.0);
  CHECK(report.avg_time_sec > 0.0);
  CHECK(report.folds == 10);
}

TEST_CASE("evaluate split on synthetic linear data lands in a sane band") {
  std::mt19937_64 gen(61);
  std::string csv = "x,y\n";
  for (int i = 0; i < 41; ++i) {
    const double x = standard_normal(gen);
    const double y = 2.0 * x + standard_normal(gen);
    csv += std::to_string(x) + "," + std::to_string(y) + "\n";
  }
  TempFile data("cfio_eval_lin.csv", csv);
  RunConfig cfg;
  cfg.mode = "multi";
  cfg.method = "split";
  cfg.model = "ols";
  cfg.alpha = 0.1;
  cfg.seed = 3;
  cfg.input = data.path.string();
  cfg.response_cols = "y";
  const auto report = evaluate(cfg);
  CHECK(report.coverage >= 0.8);
  CHECK(report.coverage <= 1.0);
  CHECK(report.avg_size > 0.0);
  CHECK(report.avg_time_sec > 0.0);

  const auto doc = eval_to_json(cfg, report);
  CHECK(doc["schema"] == "conformal-eval/1");
  CHECK(doc["folds"] == 41);
}

TEST_CASE("evaluate attaches the fold index to propagated errors") {
  TempFile data("cfio_eval_err.csv",
                "x,y\n"
                "0,1\n"
                "1,2\n"
                "2,3\n"
                "3,4\n");
  RunConfig cfg;
  cfg.mode = "multi";
  cfg.method = "nonsense";
  cfg.input = data.path.string();
  cfg.response_cols = "y";
  try {
    evaluate(cfg);
    FAIL("expected error");
  } catch (const error& e) {
    CHECK(std::string(e.what()).find("fold 1") != std::string::npos);
  }
}
