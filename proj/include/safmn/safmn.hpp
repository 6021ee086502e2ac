#pragma once

#include "safmn/error.hpp"
#include "safmn/tensor.hpp"
#include "safmn/ops/activation.hpp"
#include "safmn/ops/channel.hpp"
#include "safmn/ops/conv.hpp"
#include "safmn/ops/elementwise.hpp"
#include "safmn/ops/fft.hpp"
#include "safmn/ops/norm.hpp"
#include "safmn/ops/pool.hpp"
#include "safmn/ops/shuffle.hpp"
#include "safmn/model/config.hpp"
#include "safmn/model/variants.hpp"
#include "safmn/model/layers.hpp"
#include "safmn/model/blocks.hpp"
#include "safmn/model/safmn.hpp"
#include "safmn/model/checkpoint.hpp"
#include "safmn/train/loss.hpp"
#include "safmn/train/adam.hpp"
#include "safmn/train/schedule.hpp"
#include "safmn/train/trainer.hpp"
#include "safmn/profile/profiler.hpp"
#include "safmn/imaging/image.hpp"
#include "safmn/imaging/png.hpp"
#include "safmn/imaging/resize.hpp"
#include "safmn/imaging/color.hpp"
#include "safmn/imaging/metrics.hpp"
#include "safmn/imaging/sampler.hpp"
#include "safmn/imaging/synthetic.hpp"
