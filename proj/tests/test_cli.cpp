#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <unistd.h>

#include "mrd/cli.hpp"
#include "mrd/io.hpp"

using namespace mrd;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "mrd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// One synthetic dataset and trained model shared by the tests below.
struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("mrd_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    write_file_atomic(p("spec.json"),
                      R"({"n": 60, "n_sequences": 6, "output_dims": [6, 5], "n_classes": 3, "seed": 4})");
    REQUIRE(run({"synth", "--spec", p("spec.json"), "--out-dir", p("data")}).code == 0);
    const Run t = run({"train", "--view", "x=" + p("data/view0.csv"), "--view", "y=" + p("data/view1.csv"),
                       "--latent-dim", "3", "--inducing", "10", "--max-iter", "150", "--out", p("m.json")});
    REQUIRE(t.code == 0);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string p(const std::string& name) const { return (dir / name).string(); }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"train", "--latent-dim", "2"}).code == 1);
  const Run help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("transfer") != std::string::npos);
}

TEST_CASE("synth writes views, times, sequences, labels and truth") {
  for (const char* f : {"view0.csv", "view1.csv", "times.csv", "sequences.csv", "labels.csv", "truth.json"}) {
    CHECK(fs::exists(ws().dir / "data" / f));
  }
  const CsvTable labels = load_csv(ws().p("data/labels.csv"));
  CHECK(labels.columns == std::vector<std::string>{"class1", "class2", "class3"});
  CHECK(labels.data.rows() == 60);
}

TEST_CASE("train, weights and segment") {
  const ModelFile f = load_model_file(ws().p("m.json"));
  REQUIRE(f.training.has_value());
  CHECK(std::is_sorted(f.training->trace.begin(), f.training->trace.end()));
  CHECK(f.model.views[0].name == "x");

  const Run tsv = run({"weights", ws().p("m.json")});
  CHECK(tsv.code == 0);
  CHECK(tsv.out.rfind("dim\tx\ty\n1\t", 0) == 0);
  const Run js = run({"weights", ws().p("m.json"), "--format", "json"});
  CHECK(nlohmann::json::parse(js.out)["normalized"]["y"].size() == 3);

  const Run seg = run({"segment", ws().p("m.json"), "--delta", "0.05"});
  REQUIRE(seg.code == 0);
  const auto j = nlohmann::json::parse(seg.out);
  std::size_t total = j["shared"].size() + j["inactive"].size();
  for (const auto& p : j["private"]) total += p.size();
  CHECK(total == 3);
  CHECK(run({"segment", ws().p("m.json"), "--delta", "2"}).code == 1);
}

TEST_CASE("transfer writes predictions and 1-based candidates") {
  const Run r = run({"transfer", ws().p("m.json"), "--from", "x", "--to", "y", "--input", ws().p("data/view0.csv"),
                     "--out", ws().p("pred.csv"), "--k", "2", "--candidates", ws().p("cand.json"), "--max-iter",
                     "30"});
  REQUIRE(r.code == 0);
  const CsvTable pred = load_csv(ws().p("pred.csv"));
  CHECK(pred.data.rows() == 60);
  CHECK(pred.data.cols() == 5);
  const auto c = nlohmann::json::parse(read_file(ws().p("cand.json")));
  CHECK(c[0]["test_row"] == 1);
  CHECK(c[0]["candidates"].size() == 2);
  CHECK(c[0]["candidates"][0]["train_row"].get<int>() >= 1);

  CHECK(run({"transfer", ws().p("m.json"), "--from", "x", "--to", "nope", "--input", ws().p("data/view0.csv"),
             "--out", ws().p("p2.csv")})
            .code == 1);
  CHECK(run({"transfer", ws().p("m.json"), "--from", "x", "--to", "y", "--input", ws().p("data/view1.csv"),
             "--out", ws().p("p2.csv")})
            .code == 2);
  CHECK(run({"transfer", ws().p("missing.json"), "--from", "x", "--to", "y", "--input", ws().p("data/view0.csv"),
             "--out", ws().p("p2.csv")})
            .code == 2);
}

TEST_CASE("classify through a label view with fixed noise") {
  const Run t = run({"train", "--view", "x=" + ws().p("data/view0.csv"), "--view",
                     "labels=" + ws().p("data/labels.csv"), "--fixed-noise", "labels=0.3", "--latent-dim", "3",
                     "--inducing", "10", "--max-iter", "150", "--out", ws().p("c.json")});
  REQUIRE(t.code == 0);
  const MrdModel m = load_model(ws().p("c.json"));
  CHECK(m.views[1].noise_variance == doctest::Approx(0.3));
  const Run c = run({"classify", ws().p("c.json"), "--label-view", "labels", "--input", ws().p("data/view0.csv"),
                     "--out", ws().p("labels_out.csv"), "--max-iter", "30"});
  if (c.code == 0) {
    const CsvTable l = load_csv(ws().p("labels_out.csv"));
    CHECK(l.data.rows() == 60);
    CHECK(l.data.minCoeff() >= 1.0);
    CHECK(l.data.maxCoeff() <= 3.0);
  } else {
    // a label view without any shared dimension is reported, not guessed
    CHECK(c.code == 2);
    CHECK(c.err.find("degenerate segmentation") != std::string::npos);
  }
  CHECK(run({"classify", ws().p("m.json"), "--label-view", "y", "--input", ws().p("data/view0.csv"), "--out",
             ws().p("l2.csv")})
            .code == 2);
  CHECK(run({"train", "--view", "x=" + ws().p("data/view0.csv"), "--fixed-noise", "x=-1", "--latent-dim", "2",
             "--inducing", "5", "--out", ws().p("bad.json")})
            .code == 1);
}

TEST_CASE("sample traverses a 1-based latent dimension") {
  const Run r = run({"sample", ws().p("m.json"), "--view", "y", "--dim", "1", "--range", "-2:2", "--steps", "9",
                     "--out", ws().p("s.csv")});
  REQUIRE(r.code == 0);
  CHECK(load_csv(ws().p("s.csv")).data.rows() == 9);
  CHECK(run({"sample", ws().p("m.json"), "--view", "y", "--dim", "0", "--range", "-2:2", "--steps", "9", "--out",
             ws().p("s.csv")})
            .code == 1);
  CHECK(run({"sample", ws().p("m.json"), "--view", "y", "--dim", "1", "--range", "2", "--steps", "9", "--out",
             ws().p("s.csv")})
            .code == 1);
}

TEST_CASE("dynamical training from the command line") {
  const Run t = run({"train", "--view", "x=" + ws().p("data/view0.csv"), "--view", "y=" + ws().p("data/view1.csv"),
                     "--dynamical", "--times", ws().p("data/times.csv"), "--sequences", ws().p("data/sequences.csv"),
                     "--latent-dim", "2", "--inducing", "8", "--max-iter", "60", "--out", ws().p("d.json")});
  CHECK(t.code == 0);
  CHECK(load_model(ws().p("d.json")).prior.is_dynamical());
  CHECK(run({"train", "--view", "x=" + ws().p("data/view0.csv"), "--times", ws().p("data/times.csv"),
             "--latent-dim", "2", "--inducing", "8", "--out", ws().p("d2.json")})
            .code == 1);
}

TEST_CASE("gradcheck succeeds") {
  const Run r = run({"gradcheck", "--seed", "1"});
  CHECK(r.code == 0);
  CHECK(r.out.find("max_rel_error") != std::string::npos);
}
