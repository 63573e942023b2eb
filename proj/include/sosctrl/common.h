#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace sosctrl {

// Internal invariant check. Throws std::logic_error on failure.
#define SOSCTRL_DEMAND(condition)                                         \
  do {                                                                    \
    if (!(condition)) {                                                   \
      throw std::logic_error(std::string("sosctrl demand failed: ") +     \
                             #condition + " at " + __FILE__ + ":" +       \
                             std::to_string(__LINE__));                   \
    }                                                                     \
  } while (0)

// Precondition check on user-supplied arguments.
#define SOSCTRL_REQUIRE(condition, message)                               \
  do {                                                                    \
    if (!(condition)) {                                                   \
      throw std::invalid_argument(std::string(message));                  \
    }                                                                     \
  } while (0)

}  // namespace sosctrl
