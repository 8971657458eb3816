#include <doctest.h>

#include <cmath>

#include "arithlm/errors.hpp"
#include "arithlm/metrics.hpp"
#include "arithlm/optim.hpp"
#include "arithlm/train.hpp"
#include "arithlm/vocab.hpp"

using namespace arithlm;

TEST_CASE("adam steps") {
  Tensor p({3}, std::vector<real>{1, -1, 2});
  p.set_requires_grad(true);
  std::vector<Tensor> params{p};
  AdamState state;
  AdamConfig cfg;
  adam_step(params, state, cfg);
  CHECK(p.data()[0] == 1.0f);
  CHECK(p.data()[2] == 2.0f);

  cfg.lr = 0.01f;
  state = AdamState{};
  for (int step = 0; step < 200; ++step) {
    const std::vector<real> before(p.data().begin(), p.data().end());
    for (auto& g : p.grad()) g = 0.5f;
    adam_step(params, state, cfg);
    for (std::size_t i = 0; i < 3; ++i) {
      const double delta = before[i] - p.data()[i];
      REQUIRE(delta > 0.0);
      REQUIRE(delta <= cfg.lr * (1.0 + 1e-4));
    }
  }

  Tensor a({2}, std::vector<real>{0.3f, -0.7f}), b = a.clone();
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  a.grad()[0] = b.grad()[0] = 0.2f;
  a.grad()[1] = b.grad()[1] = -1.5f;
  std::vector<Tensor> pa{a}, pb{b};
  AdamState sa, sb;
  adam_step(pa, sa, cfg);
  adamw_step(pb, sb, cfg);
  CHECK(a.data()[0] == b.data()[0]);
  CHECK(a.data()[1] == b.data()[1]);

  Tensor c({1}, std::vector<real>{2.0f});
  c.set_requires_grad(true);
  std::vector<Tensor> pc{c};
  AdamState sc;
  cfg.weight_decay = 0.5f;
  adamw_step(pc, sc, cfg);
  CHECK(c.data()[0] == doctest::Approx(2.0 * (1.0 - 0.01 * 0.5)));
}

TEST_CASE("gradient clipping") {
  Tensor a({2}, 0.0f), b({1}, 0.0f);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  a.grad()[0] = 3.0f;
  a.grad()[1] = 0.0f;
  b.grad()[0] = 4.0f;
  std::vector<Tensor> ps{a, b};
  CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
  CHECK(b.grad()[0] == doctest::Approx(0.8));
  CHECK(clip_grad_norm(ps, 10.0) == doctest::Approx(1.0));
  CHECK(b.grad()[0] == doctest::Approx(0.8));
}

TEST_CASE("token-level metrics") {
  const std::vector<int> truth{3, 4, 3, 3, 4, 4};
  CHECK(sequence_accuracy(truth, truth, 3) == 1.0);
  std::vector<int> pred = truth;
  pred[4] = 3;
  CHECK(sequence_accuracy(pred, truth, 3) == doctest::Approx(0.5));
  CHECK(token_accuracy(pred, truth) == doctest::Approx(5.0 / 6));
  CHECK(token_accuracy(pred, truth) >= sequence_accuracy(pred, truth, 3));
  CHECK_THROWS_AS(sequence_accuracy(std::vector<int>{}, std::vector<int>{}, 3), ContractError);
  CHECK_THROWS_AS(token_accuracy(std::vector<int>{}, std::vector<int>{}), ContractError);

  // LSB-first "100" = 1, off by one LSB from "000" and "010" = 2 vs 3.
  const std::vector<int> gen{3, 3, 3, 3, 4, 3};
  const std::vector<std::uint64_t> values{1, 3};
  const auto e = mean_absolute_error(gen, values, 3, DigitOrder::Reverse);
  CHECK(e.mae == doctest::Approx(1.0));
  CHECK(e.malformed_rate == 0.0);
  const std::vector<int> junk{2, 3, 3, 3, 4, 3};
  const auto j = mean_absolute_error(junk, values, 3, DigitOrder::Reverse);
  CHECK(j.malformed_rate == doctest::Approx(1.0 / 6));
}

TEST_CASE("flop estimates") {
  const auto add = estimate_flops(701000, 12288, 23, 50);
  CHECK(double(add.flops) == doctest::Approx(5.9e13).epsilon(0.01));
  CHECK(add.flops == 6ull * 701000ull * add.tokens);
  const auto mul = estimate_flops(701000, 12288, 29, 250);
  CHECK(double(mul.flops) == doctest::Approx(3.74e14).epsilon(0.01));
  CHECK(estimate_flops(701000, 12288, 23, 0).flops == 0);
}

TEST_CASE("epochs to threshold") {
  std::vector<MetricsRow> curve(2);
  curve[0].epoch = 1;
  curve[0].val_seq_acc = 0.1;
  curve[1].epoch = 2;
  curve[1].val_seq_acc = 0.96;
  CHECK(epochs_to_threshold(curve, 0.95).epoch == std::optional<std::size_t>(2));
  CHECK(epochs_to_threshold(curve, 0.0).epoch == std::optional<std::size_t>(1));
  const auto never = epochs_to_threshold(curve, 0.99);
  CHECK_FALSE(never.epoch.has_value());
  CHECK(never.final_accuracy == doctest::Approx(0.96));
}

namespace {

TrainConfig tiny_config(std::size_t epochs) {
  auto cfg = TrainConfig::encoder_decoder();
  cfg.epochs = epochs;
  cfg.batch_size = 8;
  cfg.lr = 1e-3f;
  cfg.train_eval_subsample = 16;
  return cfg;
}

ModelConfig tiny_model() {
  auto m = ModelConfig::encoder_decoder();
  m.d_model = 16;
  m.d_ff = 32;
  m.num_heads = 2;
  m.encoder_layers = 1;
  m.decoder_layers = 1;
  return m;
}

}  // namespace

TEST_CASE("untrained model is at chance") {
  const auto task = TaskSpec::addition();
  const auto samples = generate_all(task);
  Rng rng(1);
  Model m(ModelConfig::encoder_decoder(), rng);
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < samples.size(); i += 16) ids.push_back(i);
  const auto ev = evaluate(m, samples, ids, task);
  CHECK(ev.sequence_accuracy <= 0.01);
  CHECK(ev.token_accuracy >= ev.sequence_accuracy);
  CHECK(ev.generated.size() == ids.size() * 8);
}

TEST_CASE("overfitting a single sample lowers the loss every epoch") {
  TaskSpec task;
  task.operand_bits = 3;
  const auto samples = generate_all(task);
  SplitSpec split;
  split.train_ids = {13};
  split.validation_ids = {14};
  Rng rng(2);
  auto mc = tiny_model();
  mc.dropout = 0.0f;
  Model m(mc, rng);
  auto cfg = tiny_config(10);
  cfg.train_eval_subsample = 0;
  const auto r = train(m, samples, split, task, cfg);
  REQUIRE(r.curve.size() == 10);
  for (std::size_t i = 1; i < r.curve.size(); ++i) CHECK(r.curve[i].loss < r.curve[i - 1].loss);
}

TEST_CASE("training is deterministic and reports per-epoch rows") {
  TaskSpec task;
  task.operand_bits = 3;
  const auto samples = generate_all(task);
  const auto split = random_split(samples.size(), 4);
  auto run = [&] {
    Rng rng(8);
    Model m(tiny_model(), rng);
    std::vector<std::string> csv;
    std::size_t best = 0, finals = 0;
    TrainCallbacks cb;
    cb.on_epoch = [&](const MetricsRow& row) { csv.push_back(to_csv(row)); };
    cb.on_checkpoint = [&](const Model&, std::size_t, CheckpointKind k) {
      (k == CheckpointKind::Best ? best : finals) += 1;
    };
    train(m, samples, split, task, tiny_config(3), cb);
    CHECK(best >= 1);
    CHECK(finals == 1);
    return csv;
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  CHECK(metrics_csv_header() ==
        "epoch,loss,train_token_acc,val_token_acc,train_seq_acc,val_seq_acc,mae");
}

TEST_CASE("decoder-only loss ignores the prompt region") {
  const auto task = TaskSpec::addition();
  Rng rng(3);
  Model m(ModelConfig::decoder_only(), rng);
  const auto s = make_sample(12, 34, task);
  const auto r = forward_teacher_forced(m, s.prompt, s.completion, false);
  // Logits exist only for completion positions, so prompt predictions carry no loss.
  CHECK(r.logits.shape() == Shape{8, 5});
  Tape tape(false);
  const auto l1 = ops::cross_entropy(tape, r.logits, s.completion).item();
  Sample t = s;
  t.prompt[0] = t.prompt[0] == vocab::kOne ? vocab::kZero : vocab::kOne;
  const auto r2 = forward_teacher_forced(m, t.prompt, s.completion, false);
  CHECK(r2.logits.shape() == Shape{8, 5});
  CHECK(std::isfinite(l1));
}

TEST_CASE("train config validation") {
  auto cfg = TrainConfig::encoder_decoder();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig::encoder_decoder();
  cfg.beta1 = 1.0f;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig::encoder_decoder();
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
