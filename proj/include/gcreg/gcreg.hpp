#pragma once

#include "gcreg/checkpoint.hpp"
#include "gcreg/data.hpp"
#include "gcreg/errors.hpp"
#include "gcreg/experiment.hpp"
#include "gcreg/nn.hpp"
#include "gcreg/optim.hpp"
#include "gcreg/regularization.hpp"
#include "gcreg/rng.hpp"
#include "gcreg/run_config.hpp"
#include "gcreg/tensor.hpp"
