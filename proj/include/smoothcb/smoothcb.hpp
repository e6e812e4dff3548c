#pragma once

#include "action_space.hpp"
#include "corral.hpp"
#include "diagnostics.hpp"
#include "elimination.hpp"
#include "environment.hpp"
#include "errors.hpp"
#include "estimator.hpp"
#include "exp4.hpp"
#include "harness.hpp"
#include "kernel.hpp"
#include "loss.hpp"
#include "policy.hpp"
#include "random.hpp"
