#pragma once

#include "maxout/bounds.hpp"
#include "maxout/enumerate.hpp"
#include "maxout/error.hpp"
#include "maxout/experiment.hpp"
#include "maxout/feas.hpp"
#include "maxout/init.hpp"
#include "maxout/net.hpp"
#include "maxout/net_json.hpp"
#include "maxout/rng.hpp"
