#pragma once

#include "chronos/core.hpp"
#include "chronos/datasets.hpp"
#include "chronos/embed.hpp"
#include "chronos/error.hpp"
#include "chronos/eval.hpp"
#include "chronos/index.hpp"
#include "chronos/random.hpp"
#include "chronos/train.hpp"
