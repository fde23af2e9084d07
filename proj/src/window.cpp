#include "qgars/window.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace qgars {

std::vector<TaskId> select_active_window(std::span<const TaskState> ready, int k_max) {
  if (k_max < 1) throw std::invalid_argument("select_active_window: k_max must be >= 1");
  std::vector<std::size_t> idx(ready.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> score(ready.size());
  for (std::size_t i = 0; i < ready.size(); ++i) score[i] = window_score(ready[i]);
  auto before = [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    if (ready[a].ready_epoch != ready[b].ready_epoch) {
      return ready[a].ready_epoch < ready[b].ready_epoch;
    }
    return ready[a].spec < ready[b].spec;
  };
  const auto k = std::min(idx.size(), static_cast<std::size_t>(k_max));
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
  std::vector<TaskId> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(ready[idx[i]].spec);
  return out;
}

}  // namespace qgars
