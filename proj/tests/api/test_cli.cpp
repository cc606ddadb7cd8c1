#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("trajgan_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Run cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const fs::path base = fs::temp_directory_path() / ("trajgan_cli_io_" + std::to_string(counter++));
  const std::string cmd = env + (env.empty() ? "" : " ") + TRAJGAN_CLI + std::string(" ") + args + " >" +
                          base.string() + ".out 2>" + base.string() + ".err";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(base.string() + ".out");
  r.err = slurp(base.string() + ".err");
  return r;
}

const std::string kTiny =
    "--set model.hidden_dim=8 model.embed_dim=4 model.class_embed_dim=4 model.mlp_dim=8 model.pool_dim=4 "
    "model.k_samples=4 train.epochs=2 train.batch_size=8 data.synthetic.scenes=20";

}  // namespace

TEST_CASE("parse matches the pinned golden CSV") {
  const fs::path dir = scratch("parse");
  const Run r = cli(std::string("parse ") + TRAJGAN_FIXTURE_DIR "/sdd --out " + (dir / "w.csv").string());
  REQUIRE(r.code == 0);
  const bool golden = slurp(dir / "w.csv") == slurp(TRAJGAN_FIXTURE_DIR "/sdd_windows_golden.csv");
  CHECK(golden);
  CHECK(r.out.find("pedestrian") != std::string::npos);

  std::ifstream hist(dir / "w_classes.csv");
  std::string line;
  std::getline(hist, line);
  double total = 0.0;
  while (std::getline(hist, line)) total += std::stod(line.substr(line.rfind(',') + 1));
  CHECK(std::abs(total - 100.0) <= 0.01);

  const auto manifest = nlohmann::json::parse(slurp(dir / "w_manifest.json"));
  CHECK(manifest["inputs"].size() == 2);
  CHECK(manifest["command"] == "parse");
}

TEST_CASE("parse reads the data root from the environment and explains empty inputs") {
  const fs::path dir = scratch("parse_env");
  const Run ok = cli("parse --out " + (dir / "w.csv").string(), "TRAJGAN_DATA_ROOT=" TRAJGAN_FIXTURE_DIR "/sdd");
  CHECK(ok.code == 0);
  const fs::path empty = scratch("parse_empty");
  const Run bad = cli("parse " + empty.string() + " --out " + (dir / "x.csv").string());
  CHECK(bad.code == 3);
  CHECK(bad.err.find("<root>/<scene_name>/<video_id>/annotations.txt") != std::string::npos);
}

TEST_CASE("train: resolved config echo, determinism and artifacts") {
  const fs::path a = scratch("train_a"), b = scratch("train_b");
  const Run ra = cli("train " + kTiny + " --seed 3 --out " + a.string());
  const Run rb = cli("train " + kTiny + " --seed 3 --out " + b.string());
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  CHECK(ra.out.find("\"seed\": 3") != std::string::npos);
  const bool same_bytes = slurp(a / "checkpoint_last.json") == slurp(b / "checkpoint_last.json");
  CHECK(same_bytes);
  for (const char* f : {"config.resolved.json", "train_log.csv", "epochs.csv", "checkpoint_best.json", "manifest.json"})
    CHECK(fs::exists(a / f));
  CHECK_FALSE(fs::exists(a / ".lock"));
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["seed"] == 3);
  CHECK(manifest["config_hash"].get<std::string>().size() == 16);

  SUBCASE("an existing run is not overwritten by accident") {
    CHECK(cli("train " + kTiny + " --seed 3 --out " + a.string()).code == 2);
  }
  SUBCASE("resume extends the run") {
    const Run more = cli("train " + kTiny + " train.epochs=3 --seed 3 --resume --out " + a.string());
    CHECK(more.code == 0);
    CHECK(more.out.find("epoch 3/3") != std::string::npos);
    CHECK(more.out.find("epoch 1/3") == std::string::npos);
  }
  SUBCASE("a held lock refuses a second run") {
    std::ofstream(a / ".lock") << "1\n";
    const Run locked = cli("train " + kTiny + " --force --out " + a.string());
    CHECK(locked.code == 7);
    CHECK(locked.err.find("in use") != std::string::npos);
  }
}

TEST_CASE("configuration errors exit with the key name") {
  const Run r = cli("train --set train.epoch=1 --out " + scratch("badkey").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("train.epoch") != std::string::npos);
  const Run usage = cli("frobnicate");
  CHECK(usage.code == 1);
}

TEST_CASE("numeric failures have their own exit code") {
  const Run r = cli("train " + kTiny + " data.synthetic.base_speed=1e200 --out " + scratch("nan").string());
  CHECK(r.code == 4);
  CHECK(r.err.find("grad norms") != std::string::npos);
}

TEST_CASE("eval and analyze write their reports") {
  const fs::path dir = scratch("eval");
  REQUIRE(cli("train " + kTiny + " --out " + dir.string()).code == 0);
  const Run ev = cli("eval " + (dir / "checkpoint_best.json").string() + " --split all");
  REQUIRE(ev.code == 0);
  CHECK(ev.out.find("reported, not reproduced") != std::string::npos);
  const std::string csv = slurp(dir / "eval_all.csv");
  CHECK(csv.find("\"GAN (LeakyReLU activation)\",20,,21.98,43.53,,\"reported, not reproduced\"") != std::string::npos);
  CHECK(fs::exists(dir / "eval_all_per_class.csv"));
  CHECK(fs::exists(dir / "eval_all_manifest.json"));

  const Run an = cli("analyze " + (dir / "checkpoint_best.json").string() + " --out " + (dir / "analysis").string());
  REQUIRE(an.code == 0);
  for (const char* f : {"pca.csv", "distances.csv", "embeddings.csv", "pca.svg", "pedestrian_distances.svg"})
    CHECK(fs::exists(dir / "analysis" / f));
  std::ifstream pca(dir / "analysis" / "pca.csv");
  std::string line;
  int rows = 0;
  while (std::getline(pca, line)) ++rows;
  CHECK(rows == 7);
  CHECK(slurp(dir / "analysis" / "pca.svg").rfind("<svg", 0) == 0);
}

TEST_CASE("the environment overrides the configured data root") {
  const fs::path dir = scratch("env_root");
  const Run r = cli("train " + kTiny + " data.source=sdd data.root=/nonexistent --out " + dir.string(),
                    "TRAJGAN_DATA_ROOT=" TRAJGAN_FIXTURE_DIR "/sdd");
  CHECK(r.code == 0);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["inputs"].size() == 2);
  const Run missing = cli("train " + kTiny + " data.source=sdd data.root=/nonexistent --out " + scratch("env_missing").string());
  CHECK(missing.code == 3);
}
