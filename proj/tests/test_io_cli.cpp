#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "test_support.hpp"
#include "volrob/cli.hpp"
#include "volrob/config.hpp"
#include "volrob/nifti.hpp"

using namespace volrob;
using namespace volrob::testing;

namespace {

const std::string kDir = "/tmp/volrob_io_tests";

std::string path_in_dir(const std::string& name) {
  std::filesystem::create_directories(kDir);
  return kDir + "/" + name;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"volrob"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

/// Volume spanning [0,1] exactly so min-max normalization is the identity.
Volume spanning_volume(Shape3 shape, std::uint64_t seed) {
  Volume v = random_volume(shape, seed);
  v.data[0] = 0.0f;
  v.data[1] = 1.0f;
  return v;
}

}  // namespace

TEST_CASE("nifti volume round trip preserves values") {
  const Volume x = spanning_volume({6, 5, 4}, 10);
  const std::string path = path_in_dir("roundtrip.nii");
  write_nifti(x, path);
  const Volume back = read_nifti_volume(path, NormalizationRule::MinMax);
  REQUIRE(back.shape == x.shape);
  for (long i = 0; i < x.size(); ++i)
    CHECK(std::abs(back.data[i] - x.data[i]) < 1e-6);
}

TEST_CASE("raw reads skip normalization entirely") {
  const Volume x = random_volume({6, 5, 4}, 11, 0.3f, 0.6f);
  const std::string path = path_in_dir("nonorm.nii");
  write_nifti(x, path);
  const Volume back = read_nifti_volume(path, NormalizationRule::None);
  CHECK(back == x);
}

TEST_CASE("emitted files have the documented layout") {
  const Volume x = random_volume({8, 8, 8}, 12);
  const std::string path = path_in_dir("layout.nii");
  write_nifti(x, path);
  const std::string bytes = file_bytes(path);
  CHECK(bytes.size() == 352 + 4ull * 8 * 8 * 8);
  std::int32_t sizeof_hdr = 0;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  CHECK(sizeof_hdr == 348);
  CHECK(bytes.substr(344, 3) == "n+1");
}

TEST_CASE("label round trip preserves the label set") {
  LabelVolume y = random_labels({8, 8, 8}, 3, 13);
  y.labels[0] = 0;
  y.labels[1] = 1;
  y.labels[2] = 2;
  const std::string path = path_in_dir("labels.nii");
  write_nifti(y, path);
  const LabelVolume back = read_nifti_labels(path);
  CHECK(back.shape == y.shape);
  CHECK(back.labels == y.labels);
  const std::set<std::int32_t> seen(back.labels.begin(), back.labels.end());
  CHECK(seen == std::set<std::int32_t>{0, 1, 2});
}

TEST_CASE("two-file NIfTI magic is rejected as unsupported") {
  const Volume x = random_volume({4, 4, 4}, 14);
  const std::string path = path_in_dir("ni1.nii");
  write_nifti(x, path);
  std::string bytes = file_bytes(path);
  bytes[344] = 'n';
  bytes[345] = 'i';
  bytes[346] = '1';
  std::ofstream(path, std::ios::binary) << bytes;
  try {
    read_nifti(path);
    FAIL("expected unsupported-format");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::UnsupportedFormat);
  }
}

TEST_CASE("garbage magic is a distinct bad-magic error") {
  const Volume x = random_volume({4, 4, 4}, 15);
  const std::string path = path_in_dir("badmagic.nii");
  write_nifti(x, path);
  std::string bytes = file_bytes(path);
  bytes[344] = 'x';
  std::ofstream(path, std::ios::binary) << bytes;
  try {
    read_nifti(path);
    FAIL("expected bad-magic");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::BadMagic);
  }
}

TEST_CASE("unsupported datatypes are refused, never misread") {
  const Volume x = random_volume({4, 4, 4}, 16);
  const std::string path = path_in_dir("float64.nii");
  write_nifti(x, path);
  std::string bytes = file_bytes(path);
  const std::int16_t dt = 64;  // float64
  std::memcpy(bytes.data() + 70, &dt, 2);
  std::ofstream(path, std::ios::binary) << bytes;
  try {
    read_nifti(path);
    FAIL("expected unsupported-datatype");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::UnsupportedDatatype);
  }
}

TEST_CASE("truncated payloads are reported") {
  const Volume x = random_volume({8, 8, 8}, 17);
  const std::string path = path_in_dir("truncated.nii");
  write_nifti(x, path);
  const std::string bytes = file_bytes(path);
  std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 100);
  try {
    read_nifti(path);
    FAIL("expected truncated-file");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::TruncatedFile);
  }
}

TEST_CASE("scl_slope and scl_inter are honored") {
  const Volume x = random_volume({4, 4, 4}, 18, 0.1f, 0.9f);
  const std::string path = path_in_dir("scaled.nii");
  write_nifti(x, path);
  std::string bytes = file_bytes(path);
  const float slope = 0.5f, inter = 0.25f;
  std::memcpy(bytes.data() + 112, &slope, 4);
  std::memcpy(bytes.data() + 116, &inter, 4);
  std::ofstream(path, std::ios::binary) << bytes;
  const Volume back = read_nifti_volume(path, NormalizationRule::None);
  for (long i = 0; i < x.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(x.data[i] * 0.5 + 0.25).epsilon(1e-6));
}

TEST_CASE("min-max normalization maps constant volumes to 0.5") {
  const Volume x({4, 4, 4}, 0.7f);
  const std::string path = path_in_dir("constant.nii");
  write_nifti(x, path);
  const Volume back = read_nifti_volume(path, NormalizationRule::MinMax);
  for (const float v : back.data) CHECK(v == 0.5f);
}

TEST_CASE("the raw sidecar format round-trips volumes and labels") {
  const Volume x = random_volume({5, 6, 7}, 19);
  const std::string vp = path_in_dir("vol.raw");
  write_raw(x, vp, "test/19");
  CHECK(read_raw_volume(vp) == x);

  const LabelVolume y = random_labels({5, 6, 7}, 4, 20);
  const std::string lp = path_in_dir("lab.raw");
  write_raw(y, lp);
  CHECK(read_raw_labels(lp) == y);
}

TEST_CASE("epsilon fractions parse as exact rationals") {
  CHECK(parse_rational("8/255") == 8.0 / 255.0);
  CHECK(parse_rational("4/255") == 4.0 / 255.0);
  CHECK(parse_rational("0") == 0.0);
  CHECK(parse_rational("0.05") == 0.05);
  CHECK_THROWS_AS(parse_rational("8/0"), Error);
  CHECK_THROWS_AS(parse_rational("abc"), Error);
  CHECK_THROWS_AS(parse_rational("1/2/3"), Error);
}

TEST_CASE("band lists parse and reject malformed items") {
  const auto bands = parse_bands("0:8,16:48");
  REQUIRE(bands.size() == 2);
  CHECK(bands[0] == std::pair<int, int>{0, 8});
  CHECK(bands[1] == std::pair<int, int>{16, 48});
  CHECK_THROWS_AS(parse_bands("0-8"), Error);
  CHECK_THROWS_AS(parse_bands(""), Error);
}

TEST_CASE("unknown subcommands and flags exit with status 2") {
  CHECK(run_cli({"frobnicate"}) == 2);
  CHECK(run_cli({"phantom", "--no-such-flag"}) == 2);
  CHECK(run_cli({}) == 2);
}

TEST_CASE("cli pipeline: a zero-budget attack reproduces the input file") {
  const std::string dir = kDir + "/pipeline";
  std::filesystem::create_directories(dir);
  REQUIRE(run_cli({"phantom", "--count", "2", "--shape", "16", "--seed", "5", "--out",
                   dir + "/data"}) == 0);
  REQUIRE(run_cli({"train", "--arch", "conv-seg", "--data", dir + "/data/manifest.json",
                   "--epochs", "2", "--lr", "0.05", "--seed", "5", "--out-model",
                   dir + "/model.vrm"}) == 0);
  REQUIRE(run_cli({"attack", "--model", dir + "/model.vrm", "--image",
                   dir + "/data/img_0000.nii", "--label", dir + "/data/lab_0000.nii", "--attack",
                   "fgsm", "--eps", "0", "--out", dir + "/adv"}) == 0);

  CHECK(file_bytes(dir + "/adv/x_adv.nii") == file_bytes(dir + "/data/img_0000.nii"));

  const nlohmann::json stats = nlohmann::json::parse(file_bytes(dir + "/adv/stats.json"));
  CHECK(stats.at("linf").get<double>() == 0.0);
}

TEST_CASE("cli pipeline: seeded eval runs are byte-identical") {
  const std::string dir = kDir + "/determinism";
  std::filesystem::create_directories(dir);
  REQUIRE(run_cli({"phantom", "--count", "2", "--shape", "16", "--seed", "9", "--out",
                   dir + "/data"}) == 0);
  REQUIRE(run_cli({"train", "--arch", "conv-seg", "--data", dir + "/data/manifest.json",
                   "--epochs", "2", "--lr", "0.05", "--seed", "9", "--out-model",
                   dir + "/model.vrm"}) == 0);

  auto run_eval = [&](const std::string& out) {
    return run_cli({"eval", "--model", "conv=" + dir + "/model.vrm", "--phantoms", "2", "--shape",
                    "16", "--data-seed", "9", "--steps", "2", "--patch", "8", "--seed", "3",
                    "--out", out});
  };
  REQUIRE(run_eval(dir + "/run1") == 0);
  REQUIRE(run_eval(dir + "/run2") == 0);
  CHECK(file_bytes(dir + "/run1/report.json") == file_bytes(dir + "/run2/report.json"));
  CHECK(file_bytes(dir + "/run1/asr_table.csv") == file_bytes(dir + "/run2/asr_table.csv"));
}

TEST_CASE("experiment configs load from JSON with fraction strings") {
  const std::string path = path_in_dir("config.json");
  std::ofstream out(path);
  out << R"({
    "dataset": {"name": "phantoms", "phantom": {"count": 2, "shape": [16,16,16], "seed": 4}},
    "models": [],
    "attacks": [{"name": "pgd", "epsilon": "8/255", "steps": 7, "alpha": "2/255"}],
    "seed": 11
  })";
  out.close();
  const ExperimentConfig cfg = load_experiment_config(path);
  CHECK(cfg.dataset.phantom_count == 2);
  CHECK(cfg.window == Shape3{16, 16, 16});
  REQUIRE(cfg.attacks.size() == 1);
  CHECK(cfg.attacks[0].kind == AttackKind::Pgd);
  CHECK(cfg.attacks[0].pixel.epsilon == 8.0 / 255.0);
  CHECK(cfg.attacks[0].pixel.alpha == 2.0 / 255.0);
  CHECK(cfg.attacks[0].pixel.steps == 7);
  CHECK(cfg.seed == 11);
}
