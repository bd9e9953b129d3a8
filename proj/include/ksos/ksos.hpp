#pragma once

// Umbrella header: kernel sum-of-squares density estimation under the
// maximum mean discrepancy.

#include "ksos/common.hpp"
#include "ksos/counterexample.hpp"
#include "ksos/datasets.hpp"
#include "ksos/fit.hpp"
#include "ksos/grid.hpp"
#include "ksos/io.hpp"
#include "ksos/kernel.hpp"
#include "ksos/moments.hpp"
#include "ksos/psd_projection.hpp"
#include "ksos/quadrature.hpp"
#include "ksos/sos_model.hpp"
