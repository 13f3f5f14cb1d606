#pragma once

#include "wynn/types.hpp"
#include "wynn/linalg.hpp"
#include "wynn/model.hpp"
#include "wynn/design.hpp"
#include "wynn/estimator.hpp"
#include "wynn/noise.hpp"
#include "wynn/protocol.hpp"
#include "wynn/adaptive.hpp"
#include "wynn/stats.hpp"
#include "wynn/analysis.hpp"
