// SPDX-License-Identifier: Apache-2.0

#ifndef JUICE_JUICE_HPP
#define JUICE_JUICE_HPP

#include "juice/baselines.hpp"
#include "juice/common.hpp"
#include "juice/ep_solver.hpp"
#include "juice/exact_oracle.hpp"
#include "juice/harness.hpp"
#include "juice/io.hpp"
#include "juice/metrics.hpp"
#include "juice/model.hpp"
#include "juice/priors.hpp"

#endif  // JUICE_JUICE_HPP
