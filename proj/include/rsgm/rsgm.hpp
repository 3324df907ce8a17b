#pragma once

#include "rsgm/config.hpp"
#include "rsgm/csv.hpp"
#include "rsgm/estimators.hpp"
#include "rsgm/experiments.hpp"
#include "rsgm/heat_kernel.hpp"
#include "rsgm/manifold.hpp"
#include "rsgm/parallel.hpp"
#include "rsgm/quadrature.hpp"
#include "rsgm/rng.hpp"
#include "rsgm/sampler.hpp"
#include "rsgm/targets.hpp"
#include "rsgm/types.hpp"
