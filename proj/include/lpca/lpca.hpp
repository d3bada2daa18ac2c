#pragma once

#include "lpca/covadjust.hpp"
#include "lpca/data.hpp"
#include "lpca/distance.hpp"
#include "lpca/error.hpp"
#include "lpca/gpca.hpp"
#include "lpca/local_pca.hpp"
#include "lpca/matching.hpp"
#include "lpca/parallel.hpp"
#include "lpca/pipeline.hpp"
#include "lpca/simlab.hpp"
#include "lpca/synth.hpp"
#include "lpca/version.hpp"
