#include "arithlm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "arithlm/errors.hpp"
#include "arithlm/metrics.hpp"

namespace arithlm {

const Sample& DiagonalPairSet::by_value(std::uint32_t x) const {
  for (const auto& s : samples) {
    if (s.a == x) return s;
  }
  throw ContractError("diagonal set has no sample for operand " + std::to_string(x));
}

DiagonalPairSet build_S_from(const TaskSpec& task, std::vector<Sample> samples) {
  DiagonalPairSet s;
  s.task = task;
  std::vector<std::uint32_t> values;
  for (const auto& sample : samples) {
    if (sample.a != sample.b) throw ContractError("diagonal set sample with A != B");
    values.push_back(sample.a);
  }
  std::sort(values.begin(), values.end());
  s.samples = std::move(samples);
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = i + 1; j < values.size(); ++j) s.pairs.emplace_back(values[i], values[j]);
  }
  return s;
}

DiagonalPairSet build_S(const TaskSpec& task) {
  std::vector<Sample> samples;
  const auto n = static_cast<std::uint32_t>(task.operand_count());
  for (std::uint32_t a = 0; a < n; ++a) samples.push_back(make_sample(a, a, task));
  return build_S_from(task, std::move(samples));
}

namespace {

// Position of each operand value inside s.samples.
std::vector<std::size_t> index_by_value(const DiagonalPairSet& s) {
  std::vector<std::size_t> index(s.task.operand_count(), s.samples.size());
  for (std::size_t i = 0; i < s.samples.size(); ++i) index[s.samples[i].a] = i;
  return index;
}

double absdiff(std::uint64_t a, std::uint64_t b) {
  return a > b ? static_cast<double>(a - b) : static_cast<double>(b - a);
}

}  // namespace

std::pair<DistanceSet, DistanceSet> input_distances(const DiagonalPairSet& s) {
  const auto index = index_by_value(s);
  DistanceSet tok{"in_t", {}}, val{"in_v", {}};
  for (auto [x, y] : s.pairs) {
    const auto& sx = s.samples[index[x]];
    const auto& sy = s.samples[index[y]];
    tok.values.push_back(static_cast<double>(hamming(sx.prompt, sy.prompt)));
    val.values.push_back(absdiff(x, y));
  }
  return {tok, val};
}

std::pair<DistanceSet, DistanceSet> output_distances(const DiagonalPairSet& s) {
  const auto index = index_by_value(s);
  DistanceSet tok{"out_t", {}}, val{"out_v", {}};
  for (auto [x, y] : s.pairs) {
    const auto& sx = s.samples[index[x]];
    const auto& sy = s.samples[index[y]];
    tok.values.push_back(static_cast<double>(hamming(sx.completion, sy.completion)));
    val.values.push_back(absdiff(sx.result, sy.result));
  }
  return {tok, val};
}

namespace {

DistanceSet pairwise_l2(const std::string& tag, const std::vector<std::vector<real>>& vectors,
                        const DiagonalPairSet& s, const std::vector<std::size_t>& index) {
  DistanceSet d{tag, {}};
  d.values.reserve(s.pairs.size());
  for (auto [x, y] : s.pairs) {
    const auto& vx = vectors[index[x]];
    const auto& vy = vectors[index[y]];
    double sq = 0.0;
    for (std::size_t i = 0; i < vx.size(); ++i) {
      const double diff = static_cast<double>(vx[i]) - vy[i];
      sq += diff * diff;
    }
    d.values.push_back(std::sqrt(sq));
  }
  return d;
}

LayerActivations capture(const Model& model, const DiagonalPairSet& s) {
  std::vector<std::size_t> ids(s.samples.size());
  std::iota(ids.begin(), ids.end(), 0);
  Tape tape(false);
  PassOptions opts;
  opts.capture = true;
  return model.forward(tape, make_batch(s.samples, ids), opts).activations;
}

}  // namespace

std::vector<DistanceSet> all_embedding_distances(const Model& model, const DiagonalPairSet& s) {
  const auto acts = capture(model, s);
  const auto index = index_by_value(s);
  std::vector<DistanceSet> out;
  for (std::size_t l = 1; l <= acts.enc.size(); ++l) {
    std::vector<std::vector<real>> vecs;
    for (std::size_t i = 0; i < s.samples.size(); ++i) vecs.push_back(acts.enc_vector(l, i));
    out.push_back(pairwise_l2("enc_" + std::to_string(l), vecs, s, index));
  }
  for (std::size_t l = 1; l <= acts.dec.size(); ++l) {
    std::vector<std::vector<real>> vecs;
    for (std::size_t i = 0; i < s.samples.size(); ++i) vecs.push_back(acts.dec_vector(l, i));
    out.push_back(pairwise_l2("dec_" + std::to_string(l), vecs, s, index));
  }
  return out;
}

DistanceSet embedding_distances(const Model& model, const DiagonalPairSet& s,
                                const std::string& layer_tag) {
  const auto sep = layer_tag.find('_');
  if (sep == std::string::npos) throw RangeError("bad layer tag '" + layer_tag + "'");
  const std::string kind = layer_tag.substr(0, sep);
  const auto layer = static_cast<std::size_t>(std::stoul(layer_tag.substr(sep + 1)));
  const auto& cfg = model.config();
  const std::size_t depth = kind == "enc" ? (cfg.squeeze_encoder ? 0 : cfg.encoder_layers)
                                          : cfg.decoder_layers;
  if ((kind != "enc" && kind != "dec") || layer == 0 || layer > depth) {
    throw RangeError("layer " + layer_tag + " outside the model's depth");
  }
  const auto acts = capture(model, s);
  const auto index = index_by_value(s);
  std::vector<std::vector<real>> vecs;
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    vecs.push_back(kind == "enc" ? acts.enc_vector(layer, i) : acts.dec_vector(layer, i));
  }
  return pairwise_l2(layer_tag, vecs, s, index);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ContractError("pearson: need two equally long series of length >= 2");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    throw NumericError("correlation undefined: zero variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> fractional_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  return pearson(rx, ry);
}

double pearson(const DistanceSet& x, const DistanceSet& y) { return pearson(x.values, y.values); }
double spearman(const DistanceSet& x, const DistanceSet& y) { return spearman(x.values, y.values); }

double CorrelationReport::pearson_between(const std::string& a, const std::string& b) const {
  const auto ia = std::find(labels.begin(), labels.end(), a);
  const auto ib = std::find(labels.begin(), labels.end(), b);
  if (ia == labels.end() || ib == labels.end()) {
    throw RangeError("no distance set named " + (ia == labels.end() ? a : b));
  }
  return pearson[static_cast<std::size_t>(ia - labels.begin())]
                [static_cast<std::size_t>(ib - labels.begin())];
}

CorrelationReport correlation_matrix(const std::vector<DistanceSet>& sets) {
  CorrelationReport r;
  const std::size_t n = sets.size();
  r.pearson.assign(n, std::vector<double>(n, 1.0));
  r.spearman.assign(n, std::vector<double>(n, 1.0));
  std::vector<std::vector<double>> ranks;
  for (const auto& s : sets) {
    r.labels.push_back(s.level);
    ranks.push_back(fractional_ranks(s.values));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      r.pearson[i][j] = r.pearson[j][i] = pearson(sets[i].values, sets[j].values);
      r.spearman[i][j] = r.spearman[j][i] = pearson(ranks[i], ranks[j]);
    }
  }
  return r;
}

CorrelationReport correlation_report(const Model& model, const TaskSpec& task) {
  const auto s = build_S(task);
  auto [in_t, in_v] = input_distances(s);
  auto [out_t, out_v] = output_distances(s);
  std::vector<DistanceSet> sets{in_t, in_v, out_t, out_v};
  std::size_t enc_layers = 0, dec_layers = 0;
  for (auto& d : all_embedding_distances(model, s)) {
    (d.level.starts_with("enc") ? enc_layers : dec_layers) += 1;
    sets.push_back(std::move(d));
  }
  CorrelationReport r = correlation_matrix(sets);
  for (std::size_t l = 1; l <= dec_layers; ++l) {
    const std::string tag = "dec_" + std::to_string(l);
    r.dec_vs_out_t.push_back(r.pearson_between(tag, "out_t"));
    r.dec_vs_out_v.push_back(r.pearson_between(tag, "out_v"));
  }
  for (std::size_t l = 1; l <= enc_layers; ++l) {
    const std::string tag = "enc_" + std::to_string(l);
    r.enc_vs_in_t.push_back(r.pearson_between(tag, "in_t"));
    r.enc_vs_in_v.push_back(r.pearson_between(tag, "in_v"));
  }
  r.metadata = Json{{"task", to_json(task)},
                    {"model", to_json(model.config())},
                    {"samples", s.samples.size()},
                    {"pairs", s.pairs.size()},
                    {"pair_order", "lexicographic (X, Y), X < Y"},
                    {"decoder_activations", "teacher-forced pass over the ground-truth completion"},
                    {"decoder_includes_start_position",
                     model.config().family == Family::EncoderDecoder},
                    {"spearman_ties", "average rank"}};
  return r;
}

Json to_json(const CorrelationReport& r) {
  return Json{{"metadata", r.metadata},
              {"labels", r.labels},
              {"pearson", r.pearson},
              {"spearman", r.spearman},
              {"dec_vs_out_t", r.dec_vs_out_t},
              {"dec_vs_out_v", r.dec_vs_out_v},
              {"enc_vs_in_t", r.enc_vs_in_t},
              {"enc_vs_in_v", r.enc_vs_in_v}};
}

std::string to_csv(const CorrelationReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "a,b,pearson,spearman\n";
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    for (std::size_t j = 0; j < r.labels.size(); ++j) {
      os << r.labels[i] << ',' << r.labels[j] << ',' << r.pearson[i][j] << ',' << r.spearman[i][j]
         << '\n';
    }
  }
  return os.str();
}

std::string layer_series_svg(const CorrelationReport& r) {
  constexpr double W = 480, H = 320, L = 50, R = 20, T = 20, B = 40;
  const std::size_t n = r.dec_vs_out_t.size();
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  auto px = [&](std::size_t i) {
    return n <= 1 ? L : L + (W - L - R) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  auto py = [&](double v) { return H - B - (H - T - B) * (v + 1.0) / 2.0; };
  for (double tick : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    os << "<text x=\"" << L - 35 << "\" y=\"" << py(tick) + 4 << "\" font-size=\"11\">" << tick
       << "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    os << "<text x=\"" << px(i) - 12 << "\" y=\"" << H - B + 18 << "\" font-size=\"11\">dec_"
       << i + 1 << "</text>\n";
  }
  auto series = [&](const std::vector<double>& v, const char* color, const char* label, double y) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < v.size(); ++i) os << px(i) << ',' << py(v[i]) << ' ';
    os << "\"/>\n<text x=\"" << W - R - 140 << "\" y=\"" << y << "\" font-size=\"12\" fill=\""
       << color << "\">" << label << "</text>\n";
  };
  series(r.dec_vs_out_t, "steelblue", "corr(d_dec_i, d_out_t)", T + 14);
  series(r.dec_vs_out_v, "darkorange", "corr(d_dec_i, d_out_v)", T + 30);
  os << "</svg>\n";
  return os.str();
}

}  // namespace arithlm
