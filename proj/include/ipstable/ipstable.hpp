#pragma once

#include "ipstable/core.hpp"
#include "ipstable/line1d.hpp"
#include "ipstable/dp_target.hpp"
#include "ipstable/tree.hpp"
#include "ipstable/hst.hpp"
#include "ipstable/separated.hpp"
#include "ipstable/baselines.hpp"
#include "ipstable/hardgen.hpp"
#include "ipstable/io.hpp"
