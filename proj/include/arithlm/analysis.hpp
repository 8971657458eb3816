#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "arithlm/config.hpp"
#include "arithlm/model.hpp"
#include "arithlm/tasks.hpp"

namespace arithlm {

/// The 2^bits samples (A, A) plus the unordered pairs X < Y over their values.
struct DiagonalPairSet {
  TaskSpec task;
  std::vector<Sample> samples;  // any order; pairs refer to operand values
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;

  const Sample& by_value(std::uint32_t x) const;
};

DiagonalPairSet build_S(const TaskSpec& task);
/// Rebuilds the canonical pair ordering over an arbitrary ordering of samples.
DiagonalPairSet build_S_from(const TaskSpec& task, std::vector<Sample> samples);

struct DistanceSet {
  std::string level;  // in_t, in_v, out_t, out_v, enc_i, dec_i
  std::vector<double> values;
};

std::pair<DistanceSet, DistanceSet> input_distances(const DiagonalPairSet& s);
std::pair<DistanceSet, DistanceSet> output_distances(const DiagonalPairSet& s);

/// Euclidean distances between concatenated layer outputs ("enc_3", "dec_1", ...).
DistanceSet embedding_distances(const Model& model, const DiagonalPairSet& s,
                                const std::string& layer_tag);
/// Every encoder and decoder layer from one captured pass.
std::vector<DistanceSet> all_embedding_distances(const Model& model, const DiagonalPairSet& s);

double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson on fractional ranks; ties share their average rank.
double spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> fractional_ranks(std::span<const double> x);

double pearson(const DistanceSet& x, const DistanceSet& y);
double spearman(const DistanceSet& x, const DistanceSet& y);

struct CorrelationReport {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> pearson;
  std::vector<std::vector<double>> spearman;
  /// Pearson of each decoder layer against the output distance sets.
  std::vector<double> dec_vs_out_t;
  std::vector<double> dec_vs_out_v;
  /// Pearson of each encoder layer against the input distance sets.
  std::vector<double> enc_vs_in_t;
  std::vector<double> enc_vs_in_v;
  Json metadata;

  double pearson_between(const std::string& a, const std::string& b) const;
};

CorrelationReport correlation_matrix(const std::vector<DistanceSet>& sets);
CorrelationReport correlation_report(const Model& model, const TaskSpec& task);

Json to_json(const CorrelationReport& r);
/// One row per set pair: a,b,pearson,spearman.
std::string to_csv(const CorrelationReport& r);
/// Line chart of the decoder-layer series.
std::string layer_series_svg(const CorrelationReport& r);

}  // namespace arithlm
