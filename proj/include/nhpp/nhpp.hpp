#pragma once

// Umbrella header for the intensity-estimation and change-point library.

#include "nhpp/basis.hpp"
#include "nhpp/changepoint.hpp"
#include "nhpp/error.hpp"
#include "nhpp/inference.hpp"
#include "nhpp/io.hpp"
#include "nhpp/model.hpp"
#include "nhpp/period.hpp"
#include "nhpp/simulate.hpp"
