#pragma once

#include "r2n2/error.hpp"
#include "r2n2/timeseries.hpp"
#include "r2n2/metrics.hpp"
#include "r2n2/var.hpp"
#include "r2n2/lstm.hpp"
#include "r2n2/hybrid.hpp"
#include "r2n2/baseline.hpp"
#include "r2n2/synthetic.hpp"
#include "r2n2/serialization.hpp"
#include "r2n2/experiment.hpp"
#include "r2n2/experiment_io.hpp"
#include "r2n2/cli.hpp"
