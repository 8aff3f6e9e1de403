#pragma once

// Umbrella header: the whole library.
//
// Pipeline at a glance:
//   dataset.hpp     load / synthesize data
//   flow.hpp        invertible model, exact densities
//   train.hpp       maximum-likelihood fitting
//   posterior.hpp   conjugate latent-space conditioning (no retraining)
//   classifier.hpp  few-shot classification from per-class posteriors
//   serialize.hpp   checkpoints, posterior/bank files, reports

#include "tflw/classifier.hpp"
#include "tflw/dataset.hpp"
#include "tflw/errors.hpp"
#include "tflw/flow.hpp"
#include "tflw/gaussian.hpp"
#include "tflw/mlp.hpp"
#include "tflw/posterior.hpp"
#include "tflw/preprocess.hpp"
#include "tflw/rng.hpp"
#include "tflw/serialize.hpp"
#include "tflw/train.hpp"
