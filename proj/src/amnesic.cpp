#include "arithlm/amnesic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "arithlm/checkpoint.hpp"
#include "arithlm/errors.hpp"
#include "arithlm/metrics.hpp"

namespace arithlm {

LinearProbe fit_probe(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool ridge) {
  if (x.rows() < 2) throw ContractError("fit_probe: need at least two examples");
  if (x.rows() != y.size()) throw DimensionError("fit_probe: row count differs from targets");
  if (!x.allFinite() || !y.allFinite()) throw NumericError("fit_probe: non-finite input");

  const auto n = static_cast<double>(x.rows());
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const double ymean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - mean;
  const Eigen::VectorXd yc = y.array() - ymean;

  LinearProbe probe;
  probe.weight = Eigen::VectorXd::Zero(x.cols());
  if (yc.squaredNorm() == 0.0) {
    probe.bias = ymean;
    return probe;
  }

  Eigen::MatrixXd cov(x.cols(), x.cols());
  cov.setZero();
  cov.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose());
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= n;
  const Eigen::VectorXd rhs = xc.transpose() * yc / n;

  if (ridge) {
    const double lambda = 1e-6 * cov.trace() / static_cast<double>(x.cols());
    cov.diagonal().array() += lambda > 0.0 ? lambda : 1e-12;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw ConditioningError("fit_probe: covariance not positive");
    probe.weight = llt.solve(rhs);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
    if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-12 * std::max(d.maxCoeff(), 1.0)) {
      throw ConditioningError("fit_probe: degenerate covariance; enable the ridge term");
    }
    probe.weight = ldlt.solve(rhs);
  }
  probe.bias = ymean - mean.dot(probe.weight);
  probe.rmse = probe_rmse(probe, x, y);
  return probe;
}

double probe_rmse(const LinearProbe& probe, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::VectorXd residual = (x * probe.weight).array() + probe.bias - y.array();
  return std::sqrt(residual.squaredNorm() / static_cast<double>(y.size()));
}

void ProjectionOp::remove(const Eigen::VectorXd& w) {
  if (static_cast<std::size_t>(w.size()) != dim_) {
    throw DimensionError("projection direction has the wrong dimension");
  }
  Eigen::VectorXd u = w;
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& d : directions_) u -= d * d.dot(u);
  }
  const double norm = u.norm();
  if (!(norm > 1e-12 * std::max(w.norm(), 1e-300))) {
    throw ContractError("projection direction is zero or already removed");
  }
  directions_.push_back(u / norm);
}

ProjectionOp ProjectionOp::then(const ProjectionOp& other) const {
  ProjectionOp out = *this;
  for (const auto& d : other.directions_) out.remove(d);
  return out;
}

Eigen::VectorXd ProjectionOp::apply(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out = v;
  for (const auto& d : directions_) out -= d * d.dot(v);
  return out;
}

void ProjectionOp::apply_rows(Eigen::MatrixXd& x) const {
  for (const auto& d : directions_) {
    const Eigen::VectorXd c = x * d;
    x.noalias() -= c * d.transpose();
  }
}

void ProjectionOp::apply_prefix(std::span<real> v) const {
  if (v.size() > dim_) throw DimensionError("projected block longer than the projector");
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < v.size(); ++i) padded[static_cast<Eigen::Index>(i)] = v[i];
  const Eigen::VectorXd out = apply(padded);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = static_cast<real>(out[static_cast<Eigen::Index>(i)]);
  }
}

Eigen::MatrixXd ProjectionOp::matrix() const {
  const auto n = static_cast<Eigen::Index>(dim_);
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n);
  for (const auto& d : directions_) p -= d * d.transpose();
  return p;
}

ProjectionOp nullspace_projector(const Eigen::VectorXd& w) {
  if (w.size() == 0 || w.norm() == 0.0) throw ContractError("nullspace of a zero weight vector");
  ProjectionOp p(static_cast<std::size_t>(w.size()));
  p.remove(w);
  return p;
}

ProjectionOp random_projector(std::size_t dim, std::size_t k, Rng& rng) {
  if (k > dim) throw ContractError("more random directions than dimensions");
  ProjectionOp p(dim);
  while (p.rank_removed() < k) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = rng.normal();
    p.remove(g);
  }
  return p;
}

ProbeData collect_embeddings(const Model& model, const std::vector<Sample>& samples,
                             std::size_t layer, std::size_t batch_size) {
  if (samples.empty()) throw ContractError("collect_embeddings: no samples");
  if (layer == 0 || layer > model.config().decoder_layers) {
    throw RangeError("decoder layer " + std::to_string(layer) + " outside the model's depth");
  }
  ProbeData data;
  data.targets.resize(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    std::vector<std::size_t> ids(end - start);
    std::iota(ids.begin(), ids.end(), start);
    Tape tape(false);
    PassOptions opts;
    opts.capture = true;
    const auto acts = model.forward(tape, make_batch(samples, ids), opts).activations;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto v = acts.dec_vector(layer, i);
      if (data.embeddings.size() == 0) {
        data.embeddings.resize(static_cast<Eigen::Index>(samples.size()),
                               static_cast<Eigen::Index>(v.size()));
      }
      const auto row = static_cast<Eigen::Index>(ids[i]);
      for (std::size_t c = 0; c < v.size(); ++c) {
        data.embeddings(row, static_cast<Eigen::Index>(c)) = v[c];
      }
      data.targets[row] = static_cast<double>(samples[ids[i]].result);
    }
  }
  return data;
}

RemovalResult iterative_removal(const ProbeData& data, std::size_t iterations) {
  RemovalResult out;
  out.projector = ProjectionOp(static_cast<std::size_t>(data.embeddings.cols()));
  Eigen::MatrixXd x = data.embeddings;
  for (std::size_t it = 0; it < iterations; ++it) {
    const LinearProbe probe = fit_probe(x, data.targets);
    out.rmse_history.push_back(probe.rmse);
    out.projector.remove(probe.weight);
    x = data.embeddings;
    out.projector.apply_rows(x);
  }
  out.residual_rmse = fit_probe(x, data.targets).rmse;
  return out;
}

namespace {

double generated_accuracy(const Model& model, const std::vector<Sample>& samples,
                          const std::vector<std::size_t>& ids, const TaskSpec& task,
                          std::size_t batch) {
  EvalOptions opts;
  opts.batch_size = batch;
  opts.teacher_forced = false;
  return evaluate(model, samples, ids, task, opts).sequence_accuracy;
}

Model hooked(const Model& model, std::size_t layer, const ProjectionOp& p) {
  return overwrite_layer_activations(model, layer, [p](std::span<real> block, std::size_t) {
    p.apply_prefix(block);
  });
}

}  // namespace

AmnesicReport run_amnesic(const Model& model, const TaskSpec& task,
                          const std::vector<std::size_t>& eval_ids, const AmnesicOptions& opts) {
  const auto samples = generate_all(task);
  const std::uint64_t hash_before = parameter_hash(model);

  AmnesicReport r;
  r.layer = opts.layer;
  r.baseline_accuracy = generated_accuracy(model, samples, eval_ids, task, opts.eval_batch);
  if (r.baseline_accuracy < opts.min_baseline) {
    throw PreconditionError("baseline sequence accuracy " + std::to_string(r.baseline_accuracy) +
                            " below " + std::to_string(opts.min_baseline));
  }

  const ProbeData data = collect_embeddings(model, samples, opts.layer, opts.eval_batch);
  r.probe_rows = static_cast<std::size_t>(data.embeddings.rows());
  r.embedding_dim = static_cast<std::size_t>(data.embeddings.cols());

  const auto t0 = std::chrono::steady_clock::now();
  RemovalResult removal = iterative_removal(data, opts.iterations);
  r.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.rmse_history = removal.rmse_history;
  r.residual_rmse = removal.residual_rmse;
  r.projector = removal.projector;

  r.projected_accuracy = r.projector.rank_removed() == 0
                             ? r.baseline_accuracy
                             : generated_accuracy(hooked(model, opts.layer, r.projector), samples,
                                                  eval_ids, task, opts.eval_batch);

  Rng rng(opts.control_seed);
  r.control = random_projector(r.embedding_dim, r.projector.rank_removed(), rng);
  r.control_accuracy = r.control.rank_removed() == 0
                           ? r.baseline_accuracy
                           : generated_accuracy(hooked(model, opts.layer, r.control), samples,
                                                eval_ids, task, opts.eval_batch);

  r.parameters_unchanged = parameter_hash(model) == hash_before;
  return r;
}

Json to_json(const AmnesicReport& r) {
  return Json{{"layer", r.layer},
              {"probe_rows", r.probe_rows},
              {"embedding_dim", r.embedding_dim},
              {"probe_inputs", "teacher-forced decoder embeddings over every (A, B) pair"},
              {"probe_targets", "raw result value"},
              {"projection", "applied at every greedy decoding step, zero-padded prefix"},
              {"rmse_history", r.rmse_history},
              {"residual_rmse", r.residual_rmse},
              {"removed_directions", r.projector.rank_removed()},
              {"baseline_accuracy", r.baseline_accuracy},
              {"projected_accuracy", r.projected_accuracy},
              {"control_accuracy", r.control_accuracy},
              {"fit_seconds", r.fit_seconds},
              {"parameters_unchanged", r.parameters_unchanged}};
}

void export_directions(const std::string& path, const AmnesicReport& r) {
  auto pack = [](const ProjectionOp& p) {
    Tensor t({p.rank_removed(), p.dim()}, 0.0f);
    for (std::size_t i = 0; i < p.rank_removed(); ++i) {
      for (std::size_t j = 0; j < p.dim(); ++j) {
        t.data()[i * p.dim() + j] =
            static_cast<real>(p.directions()[i][static_cast<Eigen::Index>(j)]);
      }
    }
    return t;
  };
  Container c;
  c.header = Json{{"kind", "amnesic-directions"}, {"layer", r.layer}, {"dim", r.embedding_dim}};
  c.tensors.emplace_back("removed", pack(r.projector));
  c.tensors.emplace_back("control", pack(r.control));
  write_container(path, c);
}

}  // namespace arithlm
