#pragma once

#include "tensor.hpp"
#include "rng.hpp"
#include "ops.hpp"
#include "serialize.hpp"
#include "layers.hpp"
#include "regnet.hpp"
#include "convlstm.hpp"
#include "se.hpp"
#include "model.hpp"
#include "train.hpp"
#include "metrics.hpp"
#include "gradcheck.hpp"
#include "image.hpp"
#include "dataset.hpp"
