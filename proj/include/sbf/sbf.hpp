#pragma once

#include "sbf/backfit.hpp"
#include "sbf/bandwidth.hpp"
#include "sbf/data_model.hpp"
#include "sbf/forecast.hpp"
#include "sbf/grid.hpp"
#include "sbf/io.hpp"
#include "sbf/kernel.hpp"
#include "sbf/pipeline.hpp"
#include "sbf/simulation.hpp"
#include "sbf/smoothing.hpp"
