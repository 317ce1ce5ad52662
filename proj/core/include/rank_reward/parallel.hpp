#pragma once

#include <cstddef>
#include <functional>

namespace rank_reward {

/// Runs fn(i) for every i in [0, count) on up to `threads` workers.
/// Work is split into contiguous static blocks; fn must write only to
/// slots owned by its index so that results do not depend on `threads`.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace rank_reward
