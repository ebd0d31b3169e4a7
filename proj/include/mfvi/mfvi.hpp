#pragma once

#include "mfvi/cloud.hpp"
#include "mfvi/config.hpp"
#include "mfvi/covariance.hpp"
#include "mfvi/csv.hpp"
#include "mfvi/data.hpp"
#include "mfvi/meanfield.hpp"
#include "mfvi/model.hpp"
#include "mfvi/parallel.hpp"
#include "mfvi/rng.hpp"
#include "mfvi/schemes.hpp"
#include "mfvi/stats.hpp"
#include "mfvi/test_functions.hpp"
