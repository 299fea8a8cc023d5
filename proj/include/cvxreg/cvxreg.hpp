#pragma once

#include "cvxreg/core.hpp"
#include "cvxreg/rng.hpp"
#include "cvxreg/linalg.hpp"
#include "cvxreg/cv.hpp"
#include "cvxreg/cap.hpp"
#include "cvxreg/mb.hpp"
#include "cvxreg/lse.hpp"
#include "cvxreg/ensemble.hpp"
#include "cvxreg/posynomial.hpp"
#include "cvxreg/optimizer.hpp"
#include "cvxreg/io.hpp"
#include "cvxreg/generators.hpp"
#include "cvxreg/experiment.hpp"
