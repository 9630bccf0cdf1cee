#pragma once

#include <cstddef>

// Process-wide heap accounting. The acceptance binary replaces malloc and
// friends, so every allocation (operator new, Eigen, std containers) is seen.
namespace alloc_counter {

std::size_t live_bytes();
std::size_t peak_bytes();
/// Starts a new peak window at the current live size.
void reset_peak();

}  // namespace alloc_counter
