#pragma once

#include "elw/error.hpp"
#include "elw/el_core.hpp"
#include "elw/trial_data.hpp"
#include "elw/models.hpp"
#include "elw/estimators.hpp"
#include "elw/parallel.hpp"
#include "elw/inference.hpp"
#include "elw/simlab.hpp"
#include "elw/dataio.hpp"
