#pragma once

// Umbrella header for the full toolkit.

#include "ngnn/checkpoint.hpp"
#include "ngnn/dataset.hpp"
#include "ngnn/experiment.hpp"
#include "ngnn/grad_check.hpp"
#include "ngnn/graph.hpp"
#include "ngnn/layers.hpp"
#include "ngnn/matrix.hpp"
#include "ngnn/metrics.hpp"
#include "ngnn/model.hpp"
#include "ngnn/ngnn_spec.hpp"
#include "ngnn/optim.hpp"
#include "ngnn/perturb.hpp"
#include "ngnn/rng.hpp"
#include "ngnn/sampling.hpp"
#include "ngnn/synth.hpp"
#include "ngnn/tape.hpp"
#include "ngnn/train.hpp"
