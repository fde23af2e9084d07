#pragma once

#include "qgars/domain.hpp"

#include <span>
#include <vector>

namespace qgars {

/// Priority score used to truncate a ready set: backlog per predicted unit of
/// remaining work.
inline double window_score(const TaskState& s) {
  return s.backlog / (s.predicted_remaining > 1e-9 ? s.predicted_remaining : 1e-9);
}

/// Top min(k_max, |ready|) tasks by window_score, descending; ties go to the
/// earlier ready epoch, then the lower task id.
std::vector<TaskId> select_active_window(std::span<const TaskState> ready, int k_max);

}  // namespace qgars
