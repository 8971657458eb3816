#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arithlm/config.hpp"
#include "arithlm/model.hpp"
#include "arithlm/rng.hpp"
#include "arithlm/tasks.hpp"

namespace arithlm {

struct LinearProbe {
  Eigen::VectorXd weight;
  double bias = 0.0;
  double rmse = 0.0;
};

/// Least squares of y on the rows of x with an intercept. `ridge` adds
/// 1e-6 * trace(cov) / d to the diagonal of the centred normal equations.
LinearProbe fit_probe(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool ridge = true);
double probe_rmse(const LinearProbe& probe, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// P = I - sum_j u_j u_j^T over orthonormal u_j.
class ProjectionOp {
 public:
  ProjectionOp() = default;
  explicit ProjectionOp(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t rank_removed() const { return directions_.size(); }
  const std::vector<Eigen::VectorXd>& directions() const { return directions_; }

  /// Adds the component of `w` orthogonal to the current directions.
  void remove(const Eigen::VectorXd& w);
  /// Appends `other`'s directions, i.e. multiplies the projectors.
  ProjectionOp then(const ProjectionOp& other) const;

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  /// Rows of x projected in place.
  void apply_rows(Eigen::MatrixXd& x) const;
  /// Zero-pads `v` to dim(), projects, and writes back the leading entries.
  void apply_prefix(std::span<real> v) const;
  Eigen::MatrixXd matrix() const;

 private:
  std::size_t dim_ = 0;
  std::vector<Eigen::VectorXd> directions_;
};

ProjectionOp nullspace_projector(const Eigen::VectorXd& w);
/// `k` orthonormal directions drawn from an isotropic Gaussian.
ProjectionOp random_projector(std::size_t dim, std::size_t k, Rng& rng);

struct ProbeData {
  Eigen::MatrixXd embeddings;  // one concatenated decoder-layer vector per row
  Eigen::VectorXd targets;     // numeric result of each sample
};

/// Teacher-forced decoder-layer embeddings over every sample.
ProbeData collect_embeddings(const Model& model, const std::vector<Sample>& samples,
                             std::size_t layer, std::size_t batch_size = 512);

struct RemovalResult {
  ProjectionOp projector;
  std::vector<double> rmse_history;  // probe fitted at each iteration
  double residual_rmse = 0.0;        // fresh probe after every removal
};

RemovalResult iterative_removal(const ProbeData& data, std::size_t iterations = 2);

struct AmnesicOptions {
  std::size_t layer = 3;
  std::size_t iterations = 2;
  double min_baseline = 0.99;
  std::uint64_t control_seed = 7;
  std::size_t eval_batch = 512;
};

struct AmnesicReport {
  std::size_t layer = 3;
  std::size_t probe_rows = 0;
  std::size_t embedding_dim = 0;
  std::vector<double> rmse_history;
  double residual_rmse = 0.0;
  double baseline_accuracy = 0.0;
  double projected_accuracy = 0.0;
  double control_accuracy = 0.0;
  double fit_seconds = 0.0;
  bool parameters_unchanged = false;
  ProjectionOp projector;
  ProjectionOp control;
};

/// Fits on every (A, B) pair and evaluates greedy decoding on `eval_ids` with
/// the projector installed at every step.
AmnesicReport run_amnesic(const Model& model, const TaskSpec& task,
                          const std::vector<std::size_t>& eval_ids,
                          const AmnesicOptions& opts = {});

Json to_json(const AmnesicReport& r);
/// Removed directions as a [k x dim] tensor in the checkpoint container format.
void export_directions(const std::string& path, const AmnesicReport& r);

}  // namespace arithlm
