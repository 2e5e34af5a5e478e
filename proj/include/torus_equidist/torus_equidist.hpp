#pragma once

// Umbrella header.

#include "core.hpp"
#include "precision.hpp"
#include "rng.hpp"
#include "parallel.hpp"
#include "empirical.hpp"
#include "dynamics.hpp"
#include "measure_spec.hpp"
#include "measures.hpp"
#include "ifs.hpp"
#include "independence.hpp"
#include "equidist.hpp"
#include "geometry.hpp"
#include "scenery.hpp"
#include "io.hpp"
#include "config.hpp"
#include "experiment.hpp"
