#pragma once

// Umbrella header.

#include "sweet/autodiff.hpp"
#include "sweet/checkpoint.hpp"
#include "sweet/data.hpp"
#include "sweet/errors.hpp"
#include "sweet/eval.hpp"
#include "sweet/init_adapt.hpp"
#include "sweet/masking.hpp"
#include "sweet/pretrain.hpp"
#include "sweet/rng.hpp"
#include "sweet/tensor.hpp"
#include "sweet/verify.hpp"
#include "sweet/vit.hpp"
#include "sweet/weight_template.hpp"
