#ifndef PHEVPLAN_PHEVPLAN_HPP
#define PHEVPLAN_PHEVPLAN_HPP

// Umbrella header for the whole library.

#include "phevplan/model.hpp"
#include "phevplan/calibrate.hpp"
#include "phevplan/dmop.hpp"
#include "phevplan/qp.hpp"
#include "phevplan/relax.hpp"
#include "phevplan/online.hpp"
#include "phevplan/pathplan.hpp"
#include "phevplan/pathplan_relax.hpp"
#include "phevplan/pathplan_oracle.hpp"
#include "phevplan/io.hpp"

#endif  // PHEVPLAN_PHEVPLAN_HPP
