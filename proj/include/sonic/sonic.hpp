#pragma once

#include "sonic/bench.hpp"
#include "sonic/errors.hpp"
#include "sonic/estimator.hpp"
#include "sonic/experiment.hpp"
#include "sonic/io.hpp"
#include "sonic/lasso.hpp"
#include "sonic/moments.hpp"
#include "sonic/panel.hpp"
#include "sonic/selection.hpp"
#include "sonic/simulate.hpp"
#include "sonic/version.hpp"
