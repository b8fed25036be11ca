#pragma once

#include "rsagame/meaning.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rsagame {

/// Object prior: empty = uniform.
struct Prior {
  std::vector<double> weights;

  static Prior uniform() { return {}; }
  /// Throws Error unless non-negative and summing to 1 within 1e-9.
  static Prior explicit_weights(std::vector<double> weights);

  double at(std::size_t o, std::size_t n_objects) const {
    return weights.empty() ? 1.0 / static_cast<double>(n_objects) : weights[o];
  }
};

struct SpeakerConfig {
  double alpha = 1.0;
  CostMode cost_mode = CostMode::word_count;
  Prior prior;

  /// Throws Error if alpha <= 0 or the prior is invalid.
  void check() const;
};

/// P_L(o|u), one row per utterance. Rows with no literal mass are degenerate
/// and hold zeros.
struct ListenerTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<bool> degenerate;

  double at(std::size_t u, std::size_t o) const { return values[u * cols + o]; }
  std::span<const double> row(std::size_t u) const { return {values.data() + u * cols, cols}; }
};

/// P_S(u|o), stored utterance-major like the listener; each object column
/// sums to 1.
struct SpeakerTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t u, std::size_t o) const { return values[u * cols + o]; }
  std::vector<double> column(std::size_t o) const;
};

/// P_L(o|u) ∝ M(u,o) · P(o).
ListenerTable literal_listener(const MeaningMatrix& meaning, const Prior& prior = Prior::uniform());

/// P_S(u|o) ∝ (P_L(o|u) / |u|)^α, computed as a softmax of
/// α(ln P_L(o|u) − ln|u|) over utterances with listener mass on o.
/// Throws UnreachableObjectError if some object gets no listener mass.
SpeakerTable pragmatic_speaker(const ListenerTable& listener, std::span<const double> costs,
                               const SpeakerConfig& config);

/// Shannon entropy (nats) of column `o`.
double speaker_entropy(const SpeakerTable& speaker, std::size_t o);

/// Utterances whose probability equals the column maximum within a relative
/// tolerance. A single element means there is no tie.
std::vector<std::size_t> argmax_set(const SpeakerTable& speaker, std::size_t o,
                                    double relative_tolerance = 1e-12);

}  // namespace rsagame
