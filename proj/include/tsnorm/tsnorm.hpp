#pragma once

#include "tsnorm/changepoint.hpp"
#include "tsnorm/csv.hpp"
#include "tsnorm/diagnostics.hpp"
#include "tsnorm/error.hpp"
#include "tsnorm/harness.hpp"
#include "tsnorm/model.hpp"
#include "tsnorm/normalize.hpp"
#include "tsnorm/series.hpp"
#include "tsnorm/stats.hpp"
#include "tsnorm/synthetic.hpp"
