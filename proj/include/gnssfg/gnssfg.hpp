#pragma once

// Umbrella header.

#include "gnssfg/ekf.hpp"
#include "gnssfg/epoch_state.hpp"
#include "gnssfg/errors.hpp"
#include "gnssfg/factor.hpp"
#include "gnssfg/gnc.hpp"
#include "gnssfg/gnss_models.hpp"
#include "gnssfg/graph.hpp"
#include "gnssfg/graph_builder.hpp"
#include "gnssfg/irls.hpp"
#include "gnssfg/kernels.hpp"
#include "gnssfg/keys.hpp"
#include "gnssfg/marginalization.hpp"
#include "gnssfg/metrics.hpp"
#include "gnssfg/run_config.hpp"
#include "gnssfg/runner.hpp"
#include "gnssfg/scenario.hpp"
#include "gnssfg/scenario_io.hpp"
#include "gnssfg/sliding_window.hpp"
#include "gnssfg/solver.hpp"
#include "gnssfg/switchable.hpp"
#include "gnssfg/values.hpp"
