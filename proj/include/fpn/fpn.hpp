#pragma once

// Umbrella header: firing process networks — learning, sampling, and exact
// information-geometric analysis of discrete multivariate distributions.

#include "fpn/common.hpp"
#include "fpn/cond_table.hpp"
#include "fpn/cpt.hpp"
#include "fpn/dataset.hpp"
#include "fpn/dist_ops.hpp"
#include "fpn/engine.hpp"
#include "fpn/exact.hpp"
#include "fpn/experiments.hpp"
#include "fpn/ising.hpp"
#include "fpn/joint_table.hpp"
#include "fpn/json_io.hpp"
#include "fpn/learn.hpp"
#include "fpn/model.hpp"
#include "fpn/rng.hpp"
#include "fpn/state_space.hpp"
