#pragma once

// Umbrella header for the whole library.

#include "ideaflow/classical.hpp"
#include "ideaflow/error.hpp"
#include "ideaflow/feller.hpp"
#include "ideaflow/fit_bayes.hpp"
#include "ideaflow/fit_ml.hpp"
#include "ideaflow/jones.hpp"
#include "ideaflow/log.hpp"
#include "ideaflow/noise_model.hpp"
#include "ideaflow/rng.hpp"
#include "ideaflow/series.hpp"
#include "ideaflow/stable.hpp"
