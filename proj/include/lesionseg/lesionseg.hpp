#pragma once

#include "lesionseg/augment.hpp"
#include "lesionseg/checkpoint.hpp"
#include "lesionseg/error.hpp"
#include "lesionseg/image.hpp"
#include "lesionseg/imgio.hpp"
#include "lesionseg/metrics.hpp"
#include "lesionseg/nn/adam.hpp"
#include "lesionseg/nn/gradcheck.hpp"
#include "lesionseg/nn/layers.hpp"
#include "lesionseg/nn/loss.hpp"
#include "lesionseg/nn/tensor.hpp"
#include "lesionseg/nn/train.hpp"
#include "lesionseg/nn/unet.hpp"
#include "lesionseg/postprocess.hpp"
#include "lesionseg/rng.hpp"
#include "lesionseg/stats.hpp"
#include "lesionseg/synth.hpp"
