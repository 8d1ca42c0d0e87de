#pragma once

#include "bellfreq/bell_analysis.hpp"
#include "bellfreq/collective.hpp"
#include "bellfreq/counterexample.hpp"
#include "bellfreq/csv_io.hpp"
#include "bellfreq/epr_model.hpp"
#include "bellfreq/error.hpp"
#include "bellfreq/independence.hpp"
#include "bellfreq/json_io.hpp"
#include "bellfreq/place_selection.hpp"
#include "bellfreq/projection.hpp"
#include "bellfreq/seeding.hpp"
#include "bellfreq/version.hpp"
