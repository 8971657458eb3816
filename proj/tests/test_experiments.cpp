#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "arithlm/config.hpp"
#include "arithlm/errors.hpp"
#include "arithlm/experiments.hpp"
#include "arithlm/presets.hpp"

using namespace arithlm;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("key-value configuration") {
  const auto kv = parse_key_values("# comment\n\ntrain.lr = 0.0003\n model.dropout=0  \nsplit.name = vs_v\n");
  CHECK(kv.size() == 3);
  CHECK(kv.at("train.lr") == "0.0003");
  TaskSpec task;
  auto model = ModelConfig::encoder_decoder();
  auto train = TrainConfig::encoder_decoder();
  std::string split = "random";
  apply_key_values(kv, task, model, train, &split);
  CHECK(train.lr == doctest::Approx(3e-4));
  CHECK(model.dropout == 0.0f);
  CHECK(split == "vs_v");

  CHECK_THROWS_AS(parse_key_values("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(apply_key_values({{"model.colour", "red"}}, task, model, train), ConfigError);
  CHECK_THROWS_AS(apply_key_values({{"train.lr", "fast"}}, task, model, train), ConfigError);
  CHECK_THROWS_AS(apply_key_values({{"model.bias", "maybe"}}, task, model, train), ConfigError);
}

TEST_CASE("presets serialize and cover the experiment families") {
  std::set<std::string> names;
  for (const auto& p : all_presets()) {
    names.insert(p.name);
    const auto back = preset_from_json(to_json(p));
    CHECK(to_json(back) == to_json(p));
    CHECK(back.model == p.model);
  }
  for (const char* n : {"add-random", "mul-random", "add-vst", "add-vsv", "mul-vst", "mul-vsv",
                        "rand-output", "ablation-nope", "ablation-noattn", "ablation-noffn",
                        "ablation-squeeze", "plain-order-add", "reverse-order-add", "nanogpt-add",
                        "nanogpt-vst", "nanogpt-vsv", "smoke-add"}) {
    CHECK_MESSAGE(names.count(n), n);
  }
  CHECK_THROWS_AS(find_preset("no-such-preset"), ConfigError);
  CHECK(find_preset("ablation-nope").model.positional == PositionalEncoding::None);
  CHECK(find_preset("nanogpt-add").model.family == Family::DecoderOnly);
  CHECK(find_preset("rand-output").random_output);
}

TEST_CASE("suite table formatting") {
  std::vector<SuiteRow> rows(2);
  rows[0].preset = "a";
  rows[0].epochs_to_95 = 39;
  rows[0].final_val_seq_acc = 1.0;
  rows[1].preset = "b";
  rows[1].final_val_seq_acc = 0.024;
  const auto t = suite_table(rows);
  CHECK(t.find("| a | 0 | 39 |") != std::string::npos);
  CHECK(t.find("--- (2.4%)") != std::string::npos);
  CHECK(to_json(rows).size() == 2);
}

TEST_CASE("run directory layout and rerun from manifest") {
  auto preset = find_preset("smoke-add");
  preset.train.epochs = 2;
  const auto root = fs::temp_directory_path() / "arithlm_run_test";
  fs::remove_all(root);
  const auto first = run_preset(preset, 5, root / "a");

  std::set<std::string> entries;
  for (const auto& e : fs::directory_iterator(root / "a")) entries.insert(e.path().filename().string());
  CHECK(entries == std::set<std::string>{"checkpoints", "manifest.json", "metrics.csv", "reports"});
  CHECK(fs::exists(first.paths.best_checkpoint()));
  CHECK(fs::exists(first.paths.final_checkpoint()));

  const auto manifest = Json::parse(read_file(first.paths.manifest()));
  CHECK(manifest.at("seed") == 5);
  CHECK(manifest.at("rng") == "xoshiro256**/splitmix64");
  CHECK(manifest.at("preset").at("train").at("epochs") == 2);
  CHECK(manifest.contains("init_scheme"));
  CHECK(completed_run(root / "a").has_value());
  CHECK_FALSE(completed_run(root / "missing").has_value());

  const auto rows = read_metrics_csv(first.paths.metrics());
  CHECK(rows.size() == 2);

  rerun_manifest(first.paths.manifest(), root / "b");
  CHECK(read_file(root / "a" / "metrics.csv") == read_file(root / "b" / "metrics.csv"));
  fs::remove_all(root);
}
