#pragma once

#include "conformal/data.hpp"
#include "conformal/errors.hpp"
#include "conformal/evaluate.hpp"
#include "conformal/fd.hpp"
#include "conformal/io.hpp"
#include "conformal/models.hpp"
#include "conformal/multi.hpp"
#include "conformal/parallel.hpp"
#include "conformal/rng.hpp"
#include "conformal/run.hpp"
#include "conformal/scores.hpp"
#include "conformal/svg.hpp"
