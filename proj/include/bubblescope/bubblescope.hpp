#ifndef BUBBLESCOPE_BUBBLESCOPE_HPP
#define BUBBLESCOPE_BUBBLESCOPE_HPP

#include "calibrate.hpp"
#include "diagnose.hpp"
#include "drawdowns.hpp"
#include "errors.hpp"
#include "models.hpp"
#include "synth.hpp"
#include "timeseries.hpp"

#endif  // BUBBLESCOPE_BUBBLESCOPE_HPP
