#pragma once

#include <stdexcept>
#include <vector>

#include "dagsched/rng.hpp"

namespace dagsched {

/// Finite-state Markov channel. State labels are opaque (typically SNR in
/// dB); only the transition matrix and per-state peak rates matter.
struct ChannelSpec {
  std::vector<double> states;                    // informational labels
  std::vector<std::vector<double>> transition;   // row-stochastic
  std::vector<int> peak_rates;                   // packets/slot at x = 1

  int num_states() const { return static_cast<int>(states.size()); }
  void validate() const;
};

/// Finite grid of allocatable time fractions, always containing 0 and 1.
struct ResourceActionSet {
  std::vector<double> grid;
  void validate() const;
  int size() const { return static_cast<int>(grid.size()); }
};

/// floor(R(h) * x): integral rate from a linear TDMA capacity share.
int rate(const ChannelSpec& spec, int h, double x);

/// Samples h' from the row p_h(.|h) using the caller's stream.
int step_channel(const ChannelSpec& spec, int h, Rng& rng);

}  // namespace dagsched
