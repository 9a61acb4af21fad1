#pragma once

#include "smfd/baselines.hpp"
#include "smfd/diagnostics.hpp"
#include "smfd/errors.hpp"
#include "smfd/io.hpp"
#include "smfd/lattice.hpp"
#include "smfd/metrics.hpp"
#include "smfd/model.hpp"
#include "smfd/raster.hpp"
#include "smfd/sampler.hpp"
#include "smfd/synth.hpp"
