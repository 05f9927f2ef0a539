#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "mtcad/errors.hpp"
#include "mtcad/io.hpp"
#include "mtcad/rng.hpp"

using namespace mtcad;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mtcad_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

Dataset make_dataset(int count, int n, int lp, int m, uint64_t seed, bool keep_y) {
  Dataset d;
  d.n_devices = n;
  d.pilot_len = lp;
  d.m_antennas = m;
  d.has_received = keep_y;
  ScenarioConfig cfg;
  cfg.n_devices = n;
  cfg.pilot_len = lp;
  for (int i = 0; i < count; ++i) {
    Scenario sc = generate_scenario(cfg, split_seed(seed, 2 * i));
    d.samples.push_back(draw_sample(sc, m, 0.2, split_seed(seed, 2 * i + 1), keep_y));
  }
  return d;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("dataset round-trips bit exactly") {
  TempDir tmp;
  Dataset d = make_dataset(5, 6, 4, 8, 77, false);
  save_dataset(tmp.file("a.mtcds"), d);
  Dataset back = load_dataset(tmp.file("a.mtcds"));
  CHECK(back.n_devices == 6);
  CHECK(back.pilot_len == 4);
  CHECK(back.m_antennas == 8);
  CHECK(!back.has_received);
  REQUIRE(back.samples.size() == 5);
  for (size_t i = 0; i < 5; ++i) {
    CHECK(back.samples[i].labels == d.samples[i].labels);
    CHECK(back.samples[i].scaled_pilots.equal_bytes(d.samples[i].scaled_pilots));
    CHECK(back.samples[i].cov.equal_bytes(d.samples[i].cov));
    CHECK(back.samples[i].received.empty());
  }

  // identical content again -> byte-identical file
  save_dataset(tmp.file("b.mtcds"), d);
  CHECK(slurp(tmp.file("a.mtcds")) == slurp(tmp.file("b.mtcds")));
}

TEST_CASE("dataset with received signal kept") {
  TempDir tmp;
  Dataset d = make_dataset(3, 4, 3, 6, 78, true);
  save_dataset(tmp.file("y.mtcds"), d);
  Dataset back = load_dataset(tmp.file("y.mtcds"));
  CHECK(back.has_received);
  for (size_t i = 0; i < 3; ++i)
    CHECK(back.samples[i].received.equal_bytes(d.samples[i].received));
}

TEST_CASE("header-only dataset file") {
  TempDir tmp;
  Dataset d;
  d.n_devices = 10;
  d.pilot_len = 5;
  d.m_antennas = 4;
  save_dataset(tmp.file("empty.mtcds"), d);
  Dataset back = load_dataset(tmp.file("empty.mtcds"));
  CHECK(back.samples.empty());
  CHECK(back.n_devices == 10);
  // 6 magic + 4 version + 3*4 dims + 8 count
  CHECK(fs::file_size(tmp.file("empty.mtcds")) == 30);
}

TEST_CASE("dataset loader rejects corrupt input") {
  TempDir tmp;
  {
    std::ofstream os(tmp.file("bad.mtcds"), std::ios::binary);
    os << "NOTMAG garbage";
  }
  CHECK_THROWS_AS(load_dataset(tmp.file("bad.mtcds")), io_error);
  CHECK_THROWS_AS(load_dataset(tmp.file("missing.mtcds")), io_error);

  Dataset d = make_dataset(2, 4, 3, 6, 79, false);
  save_dataset(tmp.file("trunc.mtcds"), d);
  std::string bytes = slurp(tmp.file("trunc.mtcds"));
  {
    std::ofstream os(tmp.file("trunc.mtcds"), std::ios::binary);
    os.write(bytes.data(), bytes.size() - 16);
  }
  CHECK_THROWS_AS(load_dataset(tmp.file("trunc.mtcds")), io_error);
}

TEST_CASE("checkpoint reload reproduces forward outputs exactly") {
  TempDir tmp;
  HTConfig cfg;
  cfg.layers = 2;
  cfg.d_model = 16;
  cfg.d_attn = 8;
  cfg.heads = 2;
  cfg.d_ff = 32;
  HTParams params = HTParams::init(cfg, 3, 91);

  Dataset warm = make_dataset(6, 8, 3, 4, 80, false);
  {
    Tape tape(false);
    ht_forward(tape, build_batch_input(warm.samples, 0, 6), params,
               RunMode::TrainUpdate);
  }
  save_checkpoint(tmp.file("m.mtcht"), params);
  HTParams loaded = load_checkpoint(tmp.file("m.mtcht"));
  CHECK(loaded.bn_ready);
  CHECK(loaded.config.layers == 2);
  CHECK(loaded.pilot_len == 3);
  CHECK(loaded.param_count() == params.param_count());

  Dataset held = make_dataset(4, 8, 3, 4, 81, false);
  for (const Sample& s : held.samples) {
    auto a = ht_infer(s.scaled_pilots, s.cov, params);
    auto b = ht_infer(s.scaled_pilots, s.cov, loaded);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }

  // same params -> byte-identical checkpoint
  save_checkpoint(tmp.file("m2.mtcht"), loaded);
  CHECK(slurp(tmp.file("m.mtcht")) == slurp(tmp.file("m2.mtcht")));
}

TEST_CASE("checkpoint loader rejects mismatched blobs") {
  TempDir tmp;
  HTConfig cfg;
  cfg.layers = 1;
  cfg.d_model = 8;
  cfg.d_attn = 4;
  cfg.heads = 1;
  cfg.d_ff = 8;
  HTParams params = HTParams::init(cfg, 2, 92);
  save_checkpoint(tmp.file("ok.mtcht"), params);

  std::string bytes = slurp(tmp.file("ok.mtcht"));
  bytes[0] = 'X';
  {
    std::ofstream os(tmp.file("badmagic.mtcht"), std::ios::binary);
    os.write(bytes.data(), bytes.size());
  }
  CHECK_THROWS_AS(load_checkpoint(tmp.file("badmagic.mtcht")), io_error);
}

TEST_CASE("experiment config round-trips losslessly") {
  ExperimentConfig cfg;
  cfg.scenario.n_devices = 37;
  cfg.scenario.pilot_len = 9;
  cfg.scenario.cell_radius_km = 0.123456789012345;
  cfg.scenario.p_max_dbm = 17.25;
  cfg.scenario.noise_psd_dbm_hz = -165.5;
  cfg.scenario.bandwidth_hz = 2.5e6;
  cfg.m_antennas = 48;
  cfg.activity_ratio = 0.0625;
  cfg.data_seed = 9876543210123ULL;
  cfg.sample_count = 777;
  cfg.model.layers = 3;
  cfg.model.d_model = 64;
  cfg.model.d_attn = 16;
  cfg.model.heads = 4;
  cfg.model.d_ff = 128;
  cfg.model.c_clip = 7.5;
  cfg.train.epochs = 13;
  cfg.train.steps_per_epoch = 21;
  cfg.train.batch_size = 34;
  cfg.train.lr = 3.3e-4;
  cfg.train.decay_epochs = {5, 9};
  cfg.train.decay_factor = 0.2;
  cfg.train.seed = 55;
  cfg.fresh_scenario_per_batch = false;
  cfg.cd_passes = 17;

  ExperimentConfig back = parse_config(format_config(cfg));
  CHECK(back == cfg);

  TempDir tmp;
  save_config(tmp.file("exp.cfg"), cfg);
  CHECK(load_config(tmp.file("exp.cfg")) == cfg);
}

TEST_CASE("config parser reports unknown keys and bad values") {
  CHECK_THROWS_AS(parse_config("[scenario]\nbogus=1\n"), io_error);
  CHECK_THROWS_AS(parse_config("[scenario]\nn=abc\n"), io_error);
  CHECK_THROWS_AS(parse_config("no_equals_sign\n"), io_error);
  // comments and blank lines are fine
  ExperimentConfig c = parse_config("# comment\n\n[scenario]\nn=5 # trailing\n");
  CHECK(c.scenario.n_devices == 5);
}

TEST_CASE("curve files carry the header and all points") {
  TempDir tmp;
  RocCurve curve;
  curve.detector = "ht";
  curve.sample_count = 100;
  curve.n_devices = 20;
  curve.pilot_len = 7;
  curve.m_antennas = 16;
  curve.points = {{0.0, 0.0, 1.0}, {0.25, 0.125, 0.5}, {1.0, 1.0, 0.0}};
  save_curve(tmp.file("c.tsv"), curve);

  std::ifstream is(tmp.file("c.tsv"));
  std::string line;
  std::getline(is, line);
  CHECK(line.rfind("# detector=ht", 0) == 0);
  std::getline(is, line);
  CHECK(line == "xi\tpm\tpf");

  RocCurve back = load_curve(tmp.file("c.tsv"));
  REQUIRE(back.points.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(back.points[i].xi == curve.points[i].xi);
    CHECK(back.points[i].pm == curve.points[i].pm);
    CHECK(back.points[i].pf == curve.points[i].pf);
  }
}

TEST_CASE("loss trace format") {
  TempDir tmp;
  save_loss_trace(tmp.file("t.tsv"), {{1, 0.5, 1e-3}, {2, 0.25, 1e-4}});
  std::ifstream is(tmp.file("t.tsv"));
  std::string line;
  std::getline(is, line);
  CHECK(line == "epoch\tmean_loss\tlr");
  std::getline(is, line);
  CHECK(line == "1\t0.5\t0.001");
}
