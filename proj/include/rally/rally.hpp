// Umbrella header.
#pragma once

#include "rally/arm_model.hpp"
#include "rally/ballistics.hpp"
#include "rally/config.hpp"
#include "rally/experiment.hpp"
#include "rally/greybox.hpp"
#include "rally/impact.hpp"
#include "rally/io.hpp"
#include "rally/metrics.hpp"
#include "rally/mlp.hpp"
#include "rally/optimizer.hpp"
#include "rally/rng.hpp"
#include "rally/sim_env.hpp"
#include "rally/types.hpp"
