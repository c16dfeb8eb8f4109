#pragma once

#include "coxbar/error.hpp"
#include "coxbar/survival_data.hpp"
#include "coxbar/io.hpp"
#include "coxbar/partial_likelihood.hpp"
#include "coxbar/ccd_solver.hpp"
#include "coxbar/parallel.hpp"
#include "coxbar/bar_engine.hpp"
#include "coxbar/screening.hpp"
#include "coxbar/random.hpp"
#include "coxbar/simulate.hpp"
#include "coxbar/benchmark.hpp"

namespace coxbar {
inline constexpr const char* kVersion = "0.1.0";
}
