#pragma once

#include "voteboost/data.hpp"
#include "voteboost/dataset.hpp"
#include "voteboost/emphasis.hpp"
#include "voteboost/ensembles.hpp"
#include "voteboost/evaluation.hpp"
#include "voteboost/learners.hpp"
#include "voteboost/random.hpp"
#include "voteboost/stats.hpp"
#include "voteboost/tree.hpp"
