#pragma once

// Umbrella header. Simulation config parsing lives in bgnd/sim_config.hpp
// and is not pulled in here.

#include "bgnd/baselines.hpp"
#include "bgnd/boost_location.hpp"
#include "bgnd/boost_scale.hpp"
#include "bgnd/crps.hpp"
#include "bgnd/csv.hpp"
#include "bgnd/dataset.hpp"
#include "bgnd/ensemble.hpp"
#include "bgnd/error.hpp"
#include "bgnd/eval.hpp"
#include "bgnd/gnd.hpp"
#include "bgnd/json_io.hpp"
#include "bgnd/model.hpp"
#include "bgnd/rng.hpp"
#include "bgnd/schema.hpp"
#include "bgnd/serialize.hpp"
#include "bgnd/simulate.hpp"
#include "bgnd/timestamp.hpp"
#include "bgnd/transforms.hpp"
#include "bgnd/trees.hpp"
