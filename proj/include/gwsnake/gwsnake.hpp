#pragma once

#include "gwsnake/errors.hpp"
#include "gwsnake/grid_path.hpp"
#include "gwsnake/harness.hpp"
#include "gwsnake/limit_models.hpp"
#include "gwsnake/lineage.hpp"
#include "gwsnake/multinomial.hpp"
#include "gwsnake/offspring.hpp"
#include "gwsnake/oracle.hpp"
#include "gwsnake/random.hpp"
#include "gwsnake/rational.hpp"
#include "gwsnake/sampler.hpp"
#include "gwsnake/snake.hpp"
#include "gwsnake/svg.hpp"
#include "gwsnake/tree.hpp"
