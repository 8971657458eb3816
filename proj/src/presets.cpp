#include "arithlm/presets.hpp"

#include "arithlm/errors.hpp"

namespace arithlm {

std::string to_string(SplitKind k) {
  switch (k) {
    case SplitKind::Random: return "random";
    case SplitKind::VsT: return "vs_t";
    case SplitKind::VsV: return "vs_v";
  }
  return "random";
}

SplitKind split_kind_from_string(const std::string& s) {
  if (s == "random") return SplitKind::Random;
  if (s == "vs_t") return SplitKind::VsT;
  if (s == "vs_v") return SplitKind::VsV;
  throw ConfigError("unknown split '" + s + "'");
}

Json to_json(const ExperimentPreset& p) {
  return Json{{"name", p.name},
              {"description", p.description},
              {"task", to_json(p.task)},
              {"model", to_json(p.model)},
              {"train", to_json(p.train)},
              {"split", to_string(p.split)},
              {"random_output", p.random_output},
              {"analyses", p.analyses}};
}

ExperimentPreset preset_from_json(const Json& j) {
  ExperimentPreset p;
  p.name = j.at("name").get<std::string>();
  p.description = j.value("description", "");
  p.task = task_from_json(j.at("task"));
  p.model = model_config_from_json(j.at("model"));
  p.train = train_config_from_json(j.at("train"));
  p.split = split_kind_from_string(j.at("split").get<std::string>());
  p.random_output = j.value("random_output", false);
  p.analyses = j.value("analyses", std::vector<std::string>{});
  return p;
}

namespace {

ExperimentPreset base(std::string name, std::string description, Operation op,
                      std::size_t epochs) {
  ExperimentPreset p;
  p.name = std::move(name);
  p.description = std::move(description);
  p.task.op = op;
  p.model = ModelConfig::encoder_decoder();
  p.train = TrainConfig::encoder_decoder();
  p.train.epochs = epochs;
  return p;
}

ExperimentPreset nanogpt(std::string name, std::string description, Operation op,
                         std::size_t epochs, SplitKind split) {
  ExperimentPreset p;
  p.name = std::move(name);
  p.description = std::move(description);
  p.task.op = op;
  p.model = ModelConfig::decoder_only();
  p.train = TrainConfig::decoder_only();
  p.train.epochs = epochs;
  p.split = split;
  return p;
}

// Threshold studies only need the first epoch at 95%.
ExperimentPreset threshold_study(ExperimentPreset p) {
  p.train.epochs = 1000;
  p.train.stop_at_val_seq_acc = 0.95;
  return p;
}

std::vector<ExperimentPreset> build_presets() {
  constexpr auto Add = Operation::Add;
  constexpr auto Mul = Operation::Mul;
  std::vector<ExperimentPreset> v;

  auto add_random = base("add-random", "addition, random 3/4-1/4 split", Add, 100);
  add_random.analyses = {"correlation", "amnesic"};
  v.push_back(add_random);
  auto mul_random = base("mul-random", "multiplication, random split", Mul, 400);
  mul_random.analyses = {"correlation"};
  v.push_back(mul_random);

  auto add_vst = base("add-vst", "addition, token-space (Hamming) validation ball", Add, 100);
  add_vst.split = SplitKind::VsT;
  v.push_back(add_vst);
  auto add_vsv = base("add-vsv", "addition, value-space validation square", Add, 100);
  add_vsv.split = SplitKind::VsV;
  v.push_back(add_vsv);
  auto mul_vst = base("mul-vst", "multiplication, token-space validation ball", Mul, 400);
  mul_vst.split = SplitKind::VsT;
  v.push_back(mul_vst);
  auto mul_vsv = base("mul-vsv", "multiplication, value-space validation square", Mul, 400);
  mul_vsv.split = SplitKind::VsV;
  v.push_back(mul_vsv);

  auto rand_output = base("rand-output", "addition prompts with random 8-bit completions", Add, 1000);
  rand_output.random_output = true;
  v.push_back(rand_output);

  auto plain_add = threshold_study(base("plain-order-add", "addition, plain (MSB-first) digits", Add, 0));
  plain_add.task.input_order = plain_add.task.output_order = DigitOrder::Plain;
  v.push_back(plain_add);
  auto plain_mul = threshold_study(base("plain-order-mul", "multiplication, plain digits", Mul, 0));
  plain_mul.task.input_order = plain_mul.task.output_order = DigitOrder::Plain;
  v.push_back(plain_mul);
  v.push_back(threshold_study(base("reverse-order-add", "addition, reverse digits, stop at 95%", Add, 0)));
  auto input_plain = threshold_study(
      base("input-plain-add", "addition, plain operand digits with reverse result digits", Add, 0));
  input_plain.task.input_order = DigitOrder::Plain;
  v.push_back(input_plain);

  auto squeeze = threshold_study(base("ablation-squeeze", "encoder reduced to embedding + positions", Add, 0));
  squeeze.model.squeeze_encoder = true;
  v.push_back(squeeze);
  auto h1 = threshold_study(base("ablation-h1", "single attention head", Add, 0));
  h1.model.num_heads = 1;
  v.push_back(h1);
  auto d32 = threshold_study(base("ablation-d32", "d_model 32", Add, 0));
  d32.model.d_model = 32;
  d32.model.d_ff = 128;
  v.push_back(d32);
  auto nope = threshold_study(base("ablation-nope", "no positional encoding", Add, 0));
  nope.model.positional = PositionalEncoding::None;
  v.push_back(nope);
  auto noattn = threshold_study(base("ablation-noattn", "no attention sublayers", Add, 0));
  noattn.model.no_attention = true;
  v.push_back(noattn);
  auto noffn = threshold_study(base("ablation-noffn", "no feed-forward sublayers", Add, 0));
  noffn.model.no_ffn = true;
  v.push_back(noffn);

  v.push_back(nanogpt("nanogpt-add", "decoder-only, addition, random split", Add, 100, SplitKind::Random));
  v.push_back(nanogpt("nanogpt-mul", "decoder-only, multiplication, random split", Mul, 400, SplitKind::Random));
  v.push_back(nanogpt("nanogpt-vst", "decoder-only, addition, token-space split", Add, 100, SplitKind::VsT));
  v.push_back(nanogpt("nanogpt-vsv", "decoder-only, addition, value-space split", Add, 100, SplitKind::VsV));

  // CI-sized: 5-bit operands so a full run finishes in a few minutes.
  auto smoke = base("smoke-add", "5-bit addition smoke run", Add, 20);
  smoke.task.operand_bits = 5;
  smoke.model.dropout = 0.0f;
  smoke.train.batch_size = 4;
  smoke.train.lr = 3e-4f;
  v.push_back(smoke);
  return v;
}

}  // namespace

const std::vector<ExperimentPreset>& all_presets() {
  static const std::vector<ExperimentPreset> presets = build_presets();
  return presets;
}

const ExperimentPreset& find_preset(const std::string& name) {
  for (const auto& p : all_presets()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace arithlm
