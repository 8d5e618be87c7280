#pragma once

#include "dfml/bounds.hpp"
#include "dfml/config.hpp"
#include "dfml/data.hpp"
#include "dfml/dataset.hpp"
#include "dfml/embedding.hpp"
#include "dfml/error.hpp"
#include "dfml/experiment.hpp"
#include "dfml/losses.hpp"
#include "dfml/rademacher.hpp"
#include "dfml/random.hpp"
#include "dfml/sweep.hpp"
#include "dfml/tensor.hpp"
#include "dfml/trainer.hpp"
