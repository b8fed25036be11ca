#include "rsagame/rsa.hpp"

#include "rsagame/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rsagame {

Prior Prior::explicit_weights(std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error("prior weights must be non-negative");
    sum += w;
  }
  if (weights.empty() || std::abs(sum - 1.0) > 1e-9)
    throw Error(fmt::format("prior must sum to 1 (got {})", sum));
  return Prior{std::move(weights)};
}

void SpeakerConfig::check() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(fmt::format("alpha must be > 0 (got {})", alpha));
  if (!prior.weights.empty()) Prior::explicit_weights(prior.weights);
}

std::vector<double> SpeakerTable::column(std::size_t o) const {
  std::vector<double> out(rows);
  for (std::size_t u = 0; u < rows; ++u) out[u] = at(u, o);
  return out;
}

ListenerTable literal_listener(const MeaningMatrix& meaning, const Prior& prior) {
  meaning.check();
  if (!prior.weights.empty() && prior.weights.size() != meaning.cols)
    throw DimensionError(fmt::format("prior has {} weights for {} objects", prior.weights.size(),
                                     meaning.cols));
  ListenerTable table{meaning.rows, meaning.cols, std::vector<double>(meaning.values.size(), 0.0),
                      std::vector<bool>(meaning.rows, false)};
  for (std::size_t u = 0; u < meaning.rows; ++u) {
    double total = 0.0;
    for (std::size_t o = 0; o < meaning.cols; ++o) {
      const double mass = meaning.at(u, o) * prior.at(o, meaning.cols);
      table.values[u * meaning.cols + o] = mass;
      total += mass;
    }
    if (total > 0.0) {
      for (std::size_t o = 0; o < meaning.cols; ++o) table.values[u * meaning.cols + o] /= total;
    } else {
      table.degenerate[u] = true;
    }
  }
  return table;
}

SpeakerTable pragmatic_speaker(const ListenerTable& listener, std::span<const double> costs,
                               const SpeakerConfig& config) {
  config.check();
  if (costs.size() != listener.rows)
    throw DimensionError(fmt::format("{} costs for {} utterances", costs.size(), listener.rows));
  for (double c : costs)
    if (!(c > 0.0)) throw Error(fmt::format("utterance cost must be positive (got {})", c));

  SpeakerTable table{listener.rows, listener.cols, std::vector<double>(listener.values.size(), 0.0)};
  std::vector<double> log_weight(listener.rows);
  for (std::size_t o = 0; o < listener.cols; ++o) {
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < listener.rows; ++u) {
      const double p = listener.at(u, o);
      if (listener.degenerate[u] || !(p > 0.0)) {
        log_weight[u] = -std::numeric_limits<double>::infinity();
        continue;
      }
      log_weight[u] = config.alpha * (std::log(p) - std::log(costs[u]));
      max_log = std::max(max_log, log_weight[u]);
    }
    if (!std::isfinite(max_log))
      throw UnreachableObjectError(
          fmt::format("object {} has zero listener probability under every utterance", o));
    double total = 0.0;
    for (std::size_t u = 0; u < listener.rows; ++u) {
      const double w = std::isfinite(log_weight[u]) ? std::exp(log_weight[u] - max_log) : 0.0;
      table.values[u * listener.cols + o] = w;
      total += w;
    }
    for (std::size_t u = 0; u < listener.rows; ++u) table.values[u * listener.cols + o] /= total;
  }
  return table;
}

double speaker_entropy(const SpeakerTable& speaker, std::size_t o) {
  double h = 0.0;
  for (std::size_t u = 0; u < speaker.rows; ++u) {
    const double p = speaker.at(u, o);
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

std::vector<std::size_t> argmax_set(const SpeakerTable& speaker, std::size_t o,
                                    double relative_tolerance) {
  double best = 0.0;
  for (std::size_t u = 0; u < speaker.rows; ++u) best = std::max(best, speaker.at(u, o));
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < speaker.rows; ++u)
    if (speaker.at(u, o) >= best * (1.0 - relative_tolerance)) out.push_back(u);
  return out;
}

}  // namespace rsagame
