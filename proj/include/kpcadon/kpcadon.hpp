#pragma once

// Umbrella header for the whole library.

#include "kpcadon/branch.hpp"
#include "kpcadon/cli.hpp"
#include "kpcadon/config.hpp"
#include "kpcadon/data.hpp"
#include "kpcadon/errors.hpp"
#include "kpcadon/grid.hpp"
#include "kpcadon/kernels.hpp"
#include "kpcadon/linalg.hpp"
#include "kpcadon/manifest.hpp"
#include "kpcadon/matrix.hpp"
#include "kpcadon/metrics.hpp"
#include "kpcadon/operator.hpp"
#include "kpcadon/reconstruction.hpp"
#include "kpcadon/reduction.hpp"
#include "kpcadon/rng.hpp"
#include "kpcadon/serialize.hpp"
