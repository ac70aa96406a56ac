#pragma once

#include "tbrain/decoder.hpp"
#include "tbrain/config.hpp"
#include "tbrain/error.hpp"
#include "tbrain/eval.hpp"
#include "tbrain/formats.hpp"
#include "tbrain/kg.hpp"
#include "tbrain/linalg.hpp"
#include "tbrain/model.hpp"
#include "tbrain/random.hpp"
#include "tbrain/sampler.hpp"
#include "tbrain/sensory.hpp"
#include "tbrain/training.hpp"
