#include "arithlm/config.hpp"

#include <fstream>
#include <sstream>

#include "arithlm/errors.hpp"

namespace arithlm {

Json to_json(const ModelConfig& c) {
  return Json{{"family", to_string(c.family)},
              {"d_model", c.d_model},
              {"d_ff", c.d_ff},
              {"num_heads", c.num_heads},
              {"encoder_layers", c.encoder_layers},
              {"decoder_layers", c.decoder_layers},
              {"dropout", c.dropout},
              {"positional_encoding", to_string(c.positional)},
              {"vocab_size", c.vocab_size},
              {"max_positions", c.max_positions},
              {"bias", c.bias},
              {"squeeze_encoder", c.squeeze_encoder},
              {"no_attention", c.no_attention},
              {"no_ffn", c.no_ffn}};
}

Json to_json(const TaskSpec& t) {
  return Json{{"operation", to_string(t.op)},
              {"operand_bits", t.operand_bits},
              {"input_order", to_string(t.input_order)},
              {"output_order", to_string(t.output_order)},
              {"output_length", t.output_length()}};
}

Json to_json(const TrainConfig& c) {
  return Json{{"optimizer", to_string(c.optimizer)},
              {"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps},
              {"weight_decay", c.weight_decay},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"grad_clip", c.grad_clip},
              {"seed", c.seed},
              {"train_eval_subsample", c.train_eval_subsample},
              {"eval_batch", c.eval_batch},
              {"stop_at_val_seq_acc", c.stop_at_val_seq_acc},
              {"lr_schedule", "constant"}};
}

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  c.family = family_from_string(j.at("family").get<std::string>());
  c.d_model = j.at("d_model").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
  c.decoder_layers = j.at("decoder_layers").get<std::size_t>();
  c.dropout = j.at("dropout").get<float>();
  c.positional = positional_from_string(j.at("positional_encoding").get<std::string>());
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.max_positions = j.at("max_positions").get<std::size_t>();
  c.bias = j.at("bias").get<bool>();
  c.squeeze_encoder = j.at("squeeze_encoder").get<bool>();
  c.no_attention = j.at("no_attention").get<bool>();
  c.no_ffn = j.at("no_ffn").get<bool>();
  return c;
}

TaskSpec task_from_json(const Json& j) {
  TaskSpec t;
  t.op = operation_from_string(j.at("operation").get<std::string>());
  t.operand_bits = j.at("operand_bits").get<std::size_t>();
  t.input_order = order_from_string(j.at("input_order").get<std::string>());
  t.output_order = order_from_string(j.at("output_order").get<std::string>());
  return t;
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  c.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
  c.lr = j.at("lr").get<float>();
  c.beta1 = j.at("beta1").get<float>();
  c.beta2 = j.at("beta2").get<float>();
  c.eps = j.at("eps").get<float>();
  c.weight_decay = j.at("weight_decay").get<float>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.train_eval_subsample = j.at("train_eval_subsample").get<std::size_t>();
  c.eval_batch = j.at("eval_batch").get<std::size_t>();
  c.stop_at_val_seq_acc = j.at("stop_at_val_seq_acc").get<double>();
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "' expects a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (is.fail() || !is.eof()) {
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

void apply_key_values(const KeyValues& kv, TaskSpec& task, ModelConfig& model, TrainConfig& train,
                      std::string* split) {
  for (const auto& [key, v] : kv) {
    if (key == "task.operation") task.op = operation_from_string(v);
    else if (key == "task.operand_bits") task.operand_bits = parse_number<std::size_t>(key, v);
    else if (key == "task.digit_order") task.input_order = task.output_order = order_from_string(v);
    else if (key == "task.input_order") task.input_order = order_from_string(v);
    else if (key == "task.output_order") task.output_order = order_from_string(v);
    else if (key == "model.family") model.family = family_from_string(v);
    else if (key == "model.d_model") model.d_model = parse_number<std::size_t>(key, v);
    else if (key == "model.d_ff") model.d_ff = parse_number<std::size_t>(key, v);
    else if (key == "model.num_heads") model.num_heads = parse_number<std::size_t>(key, v);
    else if (key == "model.encoder_layers") model.encoder_layers = parse_number<std::size_t>(key, v);
    else if (key == "model.decoder_layers") model.decoder_layers = parse_number<std::size_t>(key, v);
    else if (key == "model.dropout") model.dropout = parse_number<float>(key, v);
    else if (key == "model.positional_encoding") model.positional = positional_from_string(v);
    else if (key == "model.vocab_size") model.vocab_size = parse_number<std::size_t>(key, v);
    else if (key == "model.max_positions") model.max_positions = parse_number<std::size_t>(key, v);
    else if (key == "model.bias") model.bias = parse_bool(key, v);
    else if (key == "model.squeeze_encoder") model.squeeze_encoder = parse_bool(key, v);
    else if (key == "model.no_attention") model.no_attention = parse_bool(key, v);
    else if (key == "model.no_ffn") model.no_ffn = parse_bool(key, v);
    else if (key == "train.optimizer") train.optimizer = optimizer_from_string(v);
    else if (key == "train.lr") train.lr = parse_number<float>(key, v);
    else if (key == "train.beta1") train.beta1 = parse_number<float>(key, v);
    else if (key == "train.beta2") train.beta2 = parse_number<float>(key, v);
    else if (key == "train.eps") train.eps = parse_number<float>(key, v);
    else if (key == "train.weight_decay") train.weight_decay = parse_number<float>(key, v);
    else if (key == "train.batch_size") train.batch_size = parse_number<std::size_t>(key, v);
    else if (key == "train.epochs") train.epochs = parse_number<std::size_t>(key, v);
    else if (key == "train.grad_clip") train.grad_clip = parse_number<double>(key, v);
    else if (key == "train.seed") train.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "train.train_eval_subsample") train.train_eval_subsample = parse_number<std::size_t>(key, v);
    else if (key == "train.eval_batch") train.eval_batch = parse_number<std::size_t>(key, v);
    else if (key == "train.stop_at_val_seq_acc") train.stop_at_val_seq_acc = parse_number<double>(key, v);
    else if (key == "split.name" && split) *split = v;
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace arithlm
