#pragma once

// Everything: scattering model, imaging, classifier, data, attacks,
// evaluation and defense.

#include "smgaa/ascm.hpp"
#include "smgaa/attack.hpp"
#include "smgaa/config.hpp"
#include "smgaa/dataset.hpp"
#include "smgaa/defense.hpp"
#include "smgaa/evaluation.hpp"
#include "smgaa/fft.hpp"
#include "smgaa/grid.hpp"
#include "smgaa/image_io.hpp"
#include "smgaa/imaging.hpp"
#include "smgaa/network.hpp"
#include "smgaa/parallel.hpp"
#include "smgaa/rng.hpp"
#include "smgaa/runtime.hpp"
#include "smgaa/training.hpp"
