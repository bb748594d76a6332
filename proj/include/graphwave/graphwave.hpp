#pragma once

#include "graphwave/error.hpp"
#include "graphwave/metric_graph.hpp"
#include "graphwave/profiles.hpp"
#include "graphwave/spectral/operator.hpp"
#include "graphwave/spectral/eigensolver.hpp"
#include "graphwave/spectral/free_operator.hpp"
#include "graphwave/spectral/analysis.hpp"
#include "graphwave/evolution.hpp"
#include "graphwave/runner/config.hpp"
#include "graphwave/runner/run.hpp"
#include "graphwave/runner/suite.hpp"
