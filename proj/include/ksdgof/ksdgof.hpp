#pragma once

#include "ksdgof/bootstrap.hpp"
#include "ksdgof/errors.hpp"
#include "ksdgof/estimate.hpp"
#include "ksdgof/grid_sampler.hpp"
#include "ksdgof/kernel.hpp"
#include "ksdgof/model.hpp"
#include "ksdgof/rng.hpp"
#include "ksdgof/stein.hpp"
#include "ksdgof/types.hpp"
