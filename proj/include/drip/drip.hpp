#pragma once

#include "drip/adam.hpp"
#include "drip/config.hpp"
#include "drip/dataset.hpp"
#include "drip/domain_encoder.hpp"
#include "drip/drip_model.hpp"
#include "drip/errors.hpp"
#include "drip/gradcheck.hpp"
#include "drip/inference.hpp"
#include "drip/masking.hpp"
#include "drip/matrix.hpp"
#include "drip/metrics.hpp"
#include "drip/ops.hpp"
#include "drip/param_store.hpp"
#include "drip/report.hpp"
#include "drip/rng.hpp"
#include "drip/split.hpp"
#include "drip/synthetic.hpp"
#include "drip/training.hpp"
#include "drip/variants.hpp"
