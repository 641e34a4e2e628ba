#pragma once

// Umbrella header for the moegate library: tensors with reverse-mode
// autodiff, conv/MLP layers, sparsely-gated mixture-of-experts routing,
// inhibition gating over the router-input population, the mixed-numbers
// dataset tooling, the training loop, and the feature-correlation analysis.

#include "moegate/analysis.hpp"
#include "moegate/common.hpp"
#include "moegate/config.hpp"
#include "moegate/data.hpp"
#include "moegate/digits.hpp"
#include "moegate/inhibition.hpp"
#include "moegate/layers.hpp"
#include "moegate/model.hpp"
#include "moegate/moe.hpp"
#include "moegate/ops.hpp"
#include "moegate/rng.hpp"
#include "moegate/runner.hpp"
#include "moegate/tape.hpp"
#include "moegate/tensor.hpp"
#include "moegate/train.hpp"
