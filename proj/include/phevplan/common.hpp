#ifndef PHEVPLAN_COMMON_HPP
#define PHEVPLAN_COMMON_HPP

#include <limits>

namespace phevplan {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace phevplan

#endif  // PHEVPLAN_COMMON_HPP
