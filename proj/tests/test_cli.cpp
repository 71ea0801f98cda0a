#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hiner/bitstream.hpp"
#include "hiner/cli.hpp"
#include "test_support.hpp"

using namespace hiner;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "hiner");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::vector<std::string> kTinyModel{"--embed", "3,3,2", "--strides", "3,2,2", "--widths", "2,4,4,4",
                                          "--epochs", "2"};

std::vector<std::string> with_model(std::vector<std::string> args) {
  args.insert(args.end(), kTinyModel.begin(), kTinyModel.end());
  return args;
}

}  // namespace

TEST_CASE("synth, encode, decode and eval agree") {
  const auto dir = test::scratch("cli_roundtrip");
  const auto cube = (dir / "cube").string();
  auto r = run({"synth", "--out", cube});
  REQUIRE(r.code == kExitOk);
  CHECK(std::filesystem::exists(dir / "cube_labels.json"));

  const auto stream = (dir / "a.hinr").string();
  r = run(with_model({"--seed", "3", "encode", "--input", cube, "--out", stream, "--report", (dir / "a.json").string()}));
  REQUIRE(r.code == kExitOk);
  const auto report = json::parse(slurp(dir / "a.json"));
  for (const char* key : {"bpppb", "file_bpppb", "compression_ratio", "psnr_float", "psnr_quantized",
                          "wall_seconds", "config", "rate_payload_bytes"}) {
    CHECK(report.contains(key));
  }
  const double bp = report["bpppb"];
  const std::size_t payload = report["rate_payload_bytes"];
  CHECK(bp == 8.0 * payload / (36.0 * 36.0 * 20.0));
  CHECK(report["compression_ratio"].get<double>() == doctest::Approx(16.0 / bp));
  CHECK(report["config"]["seed"] == 3);
  CHECK(std::filesystem::exists(stream + ".train.csv"));
  CHECK(slurp(stream + ".train.csv").rfind("epoch,loss,mean_psnr,lr\n", 0) == 0);
  CHECK(std::filesystem::exists(stream + ".ckpt"));

  r = run(with_model({"--seed", "3", "encode", "--input", cube, "--out", (dir / "b.hinr").string(), "--report",
                      (dir / "b.json").string()}));
  REQUIRE(r.code == kExitOk);
  CHECK(read_file(stream) == read_file(dir / "b.hinr"));

  r = run({"decode", "--input", stream, "--out", (dir / "dec").string(), "--reference", cube});
  REQUIRE(r.code == kExitOk);
  const auto decoded = json::parse(r.out);
  CHECK(decoded["psnr"]["mean"].get<double>() == report["psnr_quantized"]["mean"].get<double>());

  r = run({"decode", "--input", stream, "--out", (dir / "dec2").string()});
  REQUIRE(r.code == kExitOk);
  CHECK_FALSE(json::parse(r.out).contains("psnr"));

  r = run({"eval", "--stream", stream, "--reference", cube});
  REQUIRE(r.code == kExitOk);
  CHECK(json::parse(r.out)["psnr"]["mean"].get<double>() == report["psnr_quantized"]["mean"].get<double>());
}

TEST_CASE("error exits carry a JSON record") {
  const auto dir = test::scratch("cli_errors");
  auto r = run({"decode", "--input", (dir / "missing.hinr").string(), "--out", (dir / "x").string()});
  CHECK(r.code == kExitData);
  const auto e = json::parse(r.err);
  CHECK(e["error"]["category"] == "data");
  CHECK(e["error"].contains("kind"));
  CHECK(e["error"].contains("message"));

  const auto cube = (dir / "cube").string();
  REQUIRE(run({"synth", "--out", cube}).code == kExitOk);
  r = run({"encode", "--input", cube, "--out", (dir / "s.hinr").string(), "--budget-mb", "0.0001"});
  CHECK(r.code == kExitConfig);
  CHECK(json::parse(r.err)["error"]["kind"] == "sizing");

  r = run({"encode", "--input", cube, "--out", (dir / "s.hinr").string(), "--bitwidth", "12"});
  CHECK(r.code == kExitConfig);

  r = run({"bogus"});
  CHECK(r.code == kExitConfig);

  std::vector<std::uint8_t> junk{'N', 'O', 'P', 'E', 1, 2, 3};
  write_file(dir / "junk.hinr", junk);
  r = run({"decode", "--input", (dir / "junk.hinr").string(), "--out", (dir / "y").string()});
  CHECK(r.code == kExitData);
  CHECK(json::parse(r.err)["error"]["kind"] == "bad_magic");
}

TEST_CASE("classify needs labels") {
  const auto dir = test::scratch("cli_classify");
  const auto cube = (dir / "cube").string();
  REQUIRE(run({"synth", "--out", cube, "--height", "12", "--width", "12", "--bands", "6"}).code == kExitOk);
  const auto stream = (dir / "s.hinr").string();
  REQUIRE(run({"encode", "--input", cube, "--out", stream, "--embed", "1,1,2", "--strides", "3,2,2", "--widths",
               "2,4,4,4", "--epochs", "1"})
              .code == kExitOk);
  auto r = run({"classify", "--input", stream, "--labels", (dir / "nothing").string()});
  CHECK(r.code == kExitConfig);

  r = run({"classify", "--input", stream, "--labels", cube + "_labels", "--variants", "plain,asw", "--epochs", "2",
           "--patch", "3", "--checkpoint", (dir / "clf").string()});
  REQUIRE(r.code == kExitOk);
  const auto report = json::parse(r.out);
  for (const char* v : {"plain", "asw"}) {
    const auto& entry = report["variants"][v];
    CHECK(entry.contains("overall_accuracy"));
    CHECK(entry.contains("average_accuracy"));
    CHECK(entry.contains("kappa"));
    CHECK(entry.contains("confusion"));
    CHECK(std::filesystem::exists(dir / (std::string("clf.") + v + ".hcls")));
  }
}

TEST_CASE("ablate writes one row per variant") {
  const auto dir = test::scratch("cli_ablate");
  const auto cube = (dir / "cube").string();
  REQUIRE(run({"synth", "--out", cube, "--height", "12", "--width", "12", "--bands", "4"}).code == kExitOk);
  auto r = run({"ablate", "--input", cube, "--embed", "1,1,2", "--strides", "3,2,2", "--widths", "2,4,4,4",
                "--epochs", "1", "--variants", "default,l1_only,nonsense"});
  REQUIRE(r.code == kExitOk);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "variant,bpppb,psnr_float,psnr_q8");
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].rfind("default,", 0) == 0);
  CHECK(rows[1].rfind("l1_only,", 0) == 0);
  CHECK(rows[2] == "nonsense,nan,nan,nan");
  CHECK(json::parse(r.err)["error"]["category"] == "config");
}

TEST_CASE("config file sections feed subcommands") {
  const auto dir = test::scratch("cli_config");
  const auto cube = (dir / "cube").string();
  {
    std::ofstream cfg(dir / "run.toml");
    cfg << "seed = 4\n[synth]\nheight = 6\nwidth = 9\nbands = 3\n";
  }
  auto r = run({"--config", (dir / "run.toml").string(), "synth", "--out", cube, "--bands", "5"});
  REQUIRE(r.code == kExitOk);
  const auto loaded = load_cube(cube, CubeFormat::portable_container);
  CHECK(loaded.height == 6);
  CHECK(loaded.width == 9);
  CHECK(loaded.bands == 5);
}
