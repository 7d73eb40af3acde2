#pragma once

#include "lcurve/errors.hpp"
#include "lcurve/random.hpp"
#include "lcurve/stats.hpp"
#include "lcurve/curve_model.hpp"
#include "lcurve/prediction.hpp"
#include "lcurve/nls_fit.hpp"
#include "lcurve/gp_fit.hpp"
#include "lcurve/metrics.hpp"
#include "lcurve/data.hpp"
#include "lcurve/predictors.hpp"
#include "lcurve/sampling.hpp"
#include "lcurve/harness.hpp"
#include "lcurve/transfer.hpp"
#include "lcurve/cohort.hpp"
#include "lcurve/serialize.hpp"
