#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#include "smoothsr/dataset.hpp"
#include "smoothsr/experiment.hpp"
#include "smoothsr/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace smoothsr;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

fs::path sandbox_root() {
  return fs::temp_directory_path() / "smoothsr_cli_tests";
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = sandbox_root() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliResult run_cli(const std::string& args) {
  const char* bin = std::getenv("SMOOTHSR_CLI_BIN");
  if (!bin) throw std::runtime_error("SMOOTHSR_CLI_BIN is not set");
  static int counter = 0;
  fs::create_directories(sandbox_root());
  const fs::path capture =
      sandbox_root() / ("capture_" + std::to_string(counter++) + ".txt");
  const std::string cmd = std::string("\"") + bin + "\" " + args + " > \"" +
                          capture.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());

  CliResult res;
  res.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream in(capture, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  res.output = buf.str();
  return res;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// 30 rows of a two-input product-plus-linear target.
fs::path write_small_dataset(const fs::path& dir) {
  Dataset data;
  data.variable_names = {"x1", "x2"};
  Rng rng(5);
  for (int r = 0; r < 30; ++r) {
    const double a = rng.uniform(-1.0, 1.0);
    const double b = rng.uniform(-1.0, 1.0);
    data.values.push_back(a);
    data.values.push_back(b);
    data.target.push_back(a * b + 0.5 * a);
  }
  const fs::path path = dir / "small.csv";
  save_dataset_csv(data, path.string());
  return path;
}

fs::path write_small_problem(const fs::path& dir) {
  const fs::path path = dir / "problem.json";
  write_file(path, R"({
  "depth": 2,
  "operators": ["add", "mul"],
  "leaf_mode": "op_fold",
  "penalty": {"lambda_op": 0.1, "lambda_var": 0.1, "var_allowance": 2},
  "decode_threshold": 0.05,
  "seed": 1
})");
  return path;
}

}  // namespace

TEST_CASE("version flag exits cleanly") {
  const auto res = run_cli("--version");
  CHECK(res.exit_code == 0);
  CHECK(!res.output.empty());
}

TEST_CASE("a missing subcommand is a usage error") {
  const auto res = run_cli("");
  CHECK(res.exit_code == 2);
}

TEST_CASE("unknown flags are usage errors") {
  const auto res = run_cli("gen-data --nope x");
  CHECK(res.exit_code == 2);
}

TEST_CASE("gen-data writes a deterministic csv with manifest") {
  const auto dir = fresh_dir("gen_data");
  const auto out1 = dir / "a.csv";
  const auto out2 = dir / "b.csv";

  const auto res1 = run_cli("gen-data --problem poly10 --rows 40 --seed 9 "
                            "--range -1:1 --out \"" +
                            out1.string() + "\"");
  REQUIRE(res1.exit_code == 0);
  const auto res2 = run_cli("gen-data --problem poly10 --rows 40 --seed 9 "
                            "--range -1:1 --out \"" +
                            out2.string() + "\"");
  REQUIRE(res2.exit_code == 0);

  const std::string text1 = slurp(out1);
  CHECK(text1 == slurp(out2));
  CHECK(count_lines(text1) == 41);
  CHECK(text1.rfind("x1,x2,x3,x4,x5,x6,x7,x8,x9,x10,y\n", 0) == 0);

  const json manifest = json::parse(slurp(out1.string() + ".manifest.json"));
  CHECK(manifest.at("command") == "gen-data");
  CHECK(manifest.at("rows_written") == 40);
  CHECK(manifest.at("columns") == 11);
  CHECK(manifest.at("output_hash") == hash_file(out1.string()));
}

TEST_CASE("gen-data rejects degenerate row counts") {
  const auto dir = fresh_dir("gen_data_rows");
  const auto res = run_cli("gen-data --problem poly10 --rows 1 --out \"" +
                           (dir / "one.csv").string() + "\"");
  CHECK(res.exit_code == 2);
  CHECK(!fs::exists(dir / "one.csv"));
}

TEST_CASE("gen-data refuses to overwrite unless forced") {
  const auto dir = fresh_dir("gen_data_force");
  const auto out = dir / "d.csv";
  const std::string base = "gen-data --problem poly10 --rows 20 --out \"" +
                           out.string() + "\"";
  REQUIRE(run_cli(base).exit_code == 0);
  CHECK(run_cli(base).exit_code == 2);
  CHECK(run_cli(base + " --force").exit_code == 0);
}

TEST_CASE("gen-data canonicalizes an existing csv") {
  const auto dir = fresh_dir("gen_data_canon");
  const auto src = dir / "scruffy.csv";
  write_file(src, "x1,y\n0.50,1.00\n2,4\n");
  const auto out = dir / "canon.csv";
  const auto res = run_cli("gen-data --problem \"" + src.string() +
                           "\" --out \"" + out.string() + "\"");
  REQUIRE(res.exit_code == 0);
  CHECK(slurp(out) == "x1,y\n0.5,1\n2,4\n");
  const json manifest = json::parse(slurp(out.string() + ".manifest.json"));
  CHECK(manifest.at("problem") == "csv");
}

TEST_CASE("optimize produces the full artifact set") {
  const auto dir = fresh_dir("optimize_small");
  const auto data = write_small_dataset(dir);
  const auto config = write_small_problem(dir);
  const auto out = dir / "run";

  const auto res = run_cli("optimize --config \"" + config.string() +
                           "\" --data \"" + data.string() + "\" --out \"" +
                           out.string() +
                           "\" --max-evals 300 --seed 3 --eval-trace");
  REQUIRE(res.exit_code == 0);

  const std::string trace = slurp(out / "trace.csv");
  CHECK(trace.rfind("generation,evaluations,best_total,best_r2,op_penalty,"
                    "var_penalty,sigma\n",
                    0) == 0);
  CHECK(count_lines(trace) >= 3);

  const json genotype = json::parse(slurp(out / "genotype.json"));
  CHECK(genotype.at("values").size() == 9);  // depth 2, two inputs
  CHECK(genotype.at("layout").at("total_dim") == 9);

  const std::string formula = slurp(out / "formula.txt");
  CHECK(!formula.empty());

  const json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.at("command") == "optimize");
  CHECK(manifest.at("result").at("status") == "completed");
  CHECK(manifest.at("optimizer").at("algorithm") == "cmaes");
  CHECK(manifest.at("problem").at("num_vars") == 2);

  const std::string evals = slurp(out / "eval_trace.csv");
  CHECK(evals.rfind("eval,total,fitness_term,r2,op_penalty,var_penalty\n",
                    0) == 0);
  const std::uint64_t used = manifest.at("result").at("evaluations");
  CHECK(used > 200);
  CHECK(used <= 300);
  CHECK(count_lines(evals) == used + 1);  // every evaluation plus the header
}

TEST_CASE("optimize with a zero budget reports only the start point") {
  const auto dir = fresh_dir("optimize_zero");
  const auto data = write_small_dataset(dir);
  const auto config = write_small_problem(dir);
  const auto out = dir / "run";
  const auto res = run_cli("optimize --config \"" + config.string() +
                           "\" --data \"" + data.string() + "\" --out \"" +
                           out.string() + "\" --max-evals 0");
  REQUIRE(res.exit_code == 0);
  CHECK(count_lines(slurp(out / "trace.csv")) == 2);
}

TEST_CASE("optimize runs are reproducible across reruns and threads") {
  const auto dir = fresh_dir("optimize_repro");
  const auto data = write_small_dataset(dir);
  const auto config = write_small_problem(dir);

  const auto run = [&](const std::string& name, int threads) {
    const auto out = dir / name;
    const auto res = run_cli("optimize --config \"" + config.string() +
                             "\" --data \"" + data.string() + "\" --out \"" +
                             out.string() + "\" --max-evals 400 --seed 11 " +
                             "--eval-trace --threads " +
                             std::to_string(threads));
    REQUIRE(res.exit_code == 0);
    return out;
  };

  const auto a = run("a", 1);
  const auto b = run("b", 1);
  const auto c = run("c", 4);
  for (const char* file : {"trace.csv", "genotype.json", "formula.txt",
                           "eval_trace.csv"}) {
    CHECK(slurp(a / file) == slurp(b / file));
    CHECK(slurp(a / file) == slurp(c / file));
  }
}

TEST_CASE("optimize honors an optimizer config file") {
  const auto dir = fresh_dir("optimize_optfile");
  const auto data = write_small_dataset(dir);
  const auto config = write_small_problem(dir);
  const auto opt = dir / "opt.json";
  write_file(opt, R"({"algorithm": "one-plus-one", "max_evaluations": 200,
                      "sigma0": 0.4, "seed": 7})");
  const auto out = dir / "run";
  const auto res = run_cli("optimize --config \"" + config.string() +
                           "\" --data \"" + data.string() + "\" --opt \"" +
                           opt.string() + "\" --out \"" + out.string() + "\"");
  REQUIRE(res.exit_code == 0);
  const json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.at("optimizer").at("algorithm") == "one-plus-one");
  CHECK(manifest.at("optimizer").at("max_evaluations") == 200);
}

TEST_CASE("optimize fails cleanly when inputs are missing") {
  const auto dir = fresh_dir("optimize_missing");
  const auto config = write_small_problem(dir);
  const auto out = dir / "run";
  const auto res = run_cli("optimize --config \"" + config.string() +
                           "\" --data \"" + (dir / "nope.csv").string() +
                           "\" --out \"" + out.string() + "\"");
  CHECK(res.exit_code == 2);
  CHECK(!fs::exists(out));

  const auto res2 = run_cli("optimize --config \"" +
                            (dir / "nope.json").string() + "\" --out \"" +
                            out.string() + "\"");
  CHECK(res2.exit_code == 2);
  CHECK(!fs::exists(out));
}

TEST_CASE("optimize refuses an existing output directory unless forced") {
  const auto dir = fresh_dir("optimize_force");
  const auto data = write_small_dataset(dir);
  const auto config = write_small_problem(dir);
  const auto out = dir / "run";
  const std::string base = "optimize --config \"" + config.string() +
                           "\" --data \"" + data.string() + "\" --out \"" +
                           out.string() + "\" --max-evals 50";
  REQUIRE(run_cli(base).exit_code == 0);
  CHECK(run_cli(base).exit_code == 2);
  CHECK(run_cli(base + " --force").exit_code == 0);
}

TEST_CASE("decode prints the crisp formula for a genotype file") {
  const auto dir = fresh_dir("decode");
  const auto genotype = dir / "genotype.json";
  json doc;
  doc["layout"]["depth"] = 2;
  doc["layout"]["num_vars"] = 2;
  doc["layout"]["operators"] = {"add", "mul"};
  doc["layout"]["leaf_mode"] = "op_fold";
  doc["values"] = {-60.0, 60.0, 60.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0};
  write_file(genotype, doc.dump(2) + "\n");

  const auto res = run_cli("decode --genotype \"" + genotype.string() + "\"");
  REQUIRE(res.exit_code == 0);
  CHECK(res.output == "(1·x1) * (1·x2)\n");
}

TEST_CASE("decode validates its threshold and inputs") {
  const auto dir = fresh_dir("decode_bad");
  const auto genotype = dir / "genotype.json";
  json doc;
  doc["layout"]["depth"] = 1;
  doc["layout"]["num_vars"] = 1;
  doc["layout"]["operators"] = {"add", "mul"};
  doc["layout"]["leaf_mode"] = "op_fold";
  doc["values"] = {0.0, 1.0, 0.0};
  write_file(genotype, doc.dump(2) + "\n");

  CHECK(run_cli("decode --genotype \"" + genotype.string() +
                "\" --threshold 1.5")
            .exit_code == 2);
  CHECK(run_cli("decode --genotype \"" + (dir / "nope.json").string() + "\"")
            .exit_code == 2);
  CHECK(run_cli("decode").exit_code == 2);

  json wrong = doc;
  wrong["values"] = {0.0, 1.0};  // one value short
  const auto bad_len = dir / "short.json";
  write_file(bad_len, wrong.dump(2) + "\n");
  CHECK(run_cli("decode --genotype \"" + bad_len.string() + "\"").exit_code ==
        2);
}

TEST_CASE("fla writes the measure table and walk traces") {
  const auto dir = fresh_dir("fla_small");
  const auto data = write_small_dataset(dir);
  const auto config = write_small_problem(dir);
  const auto out = dir / "battery";

  const auto res = run_cli(
      "fla --config \"" + config.string() + "\" --data \"" + data.string() +
      "\" --out \"" + out.string() +
      "\" --manipulators poly-1-2,uni-1 --walk-length 60 --reps 2 "
      "--neighbors 4 --max-steps 6 --seed 5 --keep-traces");
  REQUIRE(res.exit_code == 0);

  const std::string report = slurp(out / "report.csv");
  CHECK(report.rfind("measure,poly-1-2,uni-1\n", 0) == 0);
  CHECK(count_lines(report) == 11);

  for (const char* manip : {"poly-1-2", "uni-1"}) {
    const fs::path walks = out / "walks" / manip;
    CHECK(fs::exists(walks / "random.csv"));
    CHECK(fs::exists(walks / "up-1.csv"));
    CHECK(fs::exists(walks / "up-2.csv"));
    CHECK(fs::exists(walks / "down-1.csv"));
    CHECK(fs::exists(walks / "down-2.csv"));
  }
  const std::string random_walk_csv =
      slurp(out / "walks" / "poly-1-2" / "random.csv");
  CHECK(random_walk_csv.rfind("step,total\n", 0) == 0);
  CHECK(count_lines(random_walk_csv) == 62);  // header + 61 points

  const json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.at("command") == "fla");
  CHECK(manifest.at("manipulators").size() == 2);
}

TEST_CASE("fla without repetitions leaves walk-length cells empty") {
  const auto dir = fresh_dir("fla_noreps");
  const auto data = write_small_dataset(dir);
  const auto config = write_small_problem(dir);
  const auto out = dir / "battery";
  const auto res = run_cli("fla --config \"" + config.string() +
                           "\" --data \"" + data.string() + "\" --out \"" +
                           out.string() +
                           "\" --manipulators uni-1 --walk-length 40 --reps 0");
  REQUIRE(res.exit_code == 0);
  const std::string report = slurp(out / "report.csv");
  CHECK(report.find("up walk length,\n") != std::string::npos);
  CHECK(report.find("down walk length,\n") != std::string::npos);
}

TEST_CASE("fla reports are reproducible across threads") {
  const auto dir = fresh_dir("fla_repro");
  const auto data = write_small_dataset(dir);
  const auto config = write_small_problem(dir);

  const auto run = [&](const std::string& name, int threads) {
    const auto out = dir / name;
    const auto res = run_cli(
        "fla --config \"" + config.string() + "\" --data \"" + data.string() +
        "\" --out \"" + out.string() +
        "\" --manipulators poly-1-15,poly-all-2 --walk-length 50 --reps 2 "
        "--neighbors 3 --max-steps 5 --seed 9 --threads " +
        std::to_string(threads));
    REQUIRE(res.exit_code == 0);
    return out;
  };
  const auto a = run("a", 1);
  const auto b = run("b", 3);
  CHECK(slurp(a / "report.csv") == slurp(b / "report.csv"));
}

TEST_CASE("fla rejects bad manipulator names") {
  const auto dir = fresh_dir("fla_badmanip");
  const auto data = write_small_dataset(dir);
  const auto config = write_small_problem(dir);
  const auto res = run_cli("fla --config \"" + config.string() +
                           "\" --data \"" + data.string() + "\" --out \"" +
                           (dir / "battery").string() +
                           "\" --manipulators gauss-3 --walk-length 40");
  CHECK(res.exit_code == 2);
}
