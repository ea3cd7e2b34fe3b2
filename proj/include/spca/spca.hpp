#pragma once

#include "spca/amp.hpp"
#include "spca/common.hpp"
#include "spca/denoiser.hpp"
#include "spca/instance.hpp"
#include "spca/phase.hpp"
#include "spca/prior.hpp"
#include "spca/quadrature.hpp"
#include "spca/rng.hpp"
#include "spca/state_evolution.hpp"
