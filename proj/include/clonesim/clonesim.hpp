#pragma once

#include "clonesim/core.hpp"
#include "clonesim/engine.hpp"
#include "clonesim/errors.hpp"
#include "clonesim/experiment.hpp"
#include "clonesim/metrics.hpp"
#include "clonesim/policies.hpp"
#include "clonesim/rng.hpp"
#include "clonesim/stochastic.hpp"
#include "clonesim/verify.hpp"
#include "clonesim/workload.hpp"
