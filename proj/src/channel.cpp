#include "dagsched/channel.hpp"

#include <cmath>
#include <string>

namespace dagsched {

void ChannelSpec::validate() const {
  if (states.empty()) throw std::invalid_argument("channel has no states");
  if (transition.size() != states.size() || peak_rates.size() != states.size())
    throw std::invalid_argument("channel spec field sizes disagree");
  for (size_t i = 0; i < transition.size(); ++i) {
    const auto& row = transition[i];
    if (row.size() != states.size())
      throw std::invalid_argument("channel transition matrix is not square");
    double total = 0.0;
    for (double p : row) {
      if (p < 0.0) throw std::invalid_argument("negative channel transition probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("channel transition row " + std::to_string(i) +
                                  " does not sum to 1");
  }
  for (int r : peak_rates)
    if (r < 0) throw std::invalid_argument("negative peak rate");
}

void ResourceActionSet::validate() const {
  if (grid.size() < 2) throw std::invalid_argument("x grid needs at least {0, 1}");
  for (size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0 || grid[i] > 1.0)
      throw std::invalid_argument("x grid entry outside [0, 1]");
    if (i > 0 && grid[i] <= grid[i - 1])
      throw std::invalid_argument("x grid must be strictly increasing");
  }
  if (grid.front() != 0.0 || grid.back() != 1.0)
    throw std::invalid_argument("x grid must contain 0 and 1");
}

int rate(const ChannelSpec& spec, int h, double x) {
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("allocation outside [0, 1]");
  if (h < 0 || h >= spec.num_states()) throw std::invalid_argument("invalid channel state");
  // small forgiveness for grid fractions that are not exactly representable
  return static_cast<int>(std::floor(spec.peak_rates[h] * x + 1e-9));
}

int step_channel(const ChannelSpec& spec, int h, Rng& rng) {
  if (h < 0 || h >= spec.num_states()) throw std::invalid_argument("invalid channel state");
  return sample_index(spec.transition[h], rng);
}

}  // namespace dagsched
