// Umbrella header.
#pragma once

#include "bundlemw/errors.hpp"
#include "bundlemw/random.hpp"
#include "bundlemw/sphere.hpp"
#include "bundlemw/gaussian.hpp"
#include "bundlemw/transport.hpp"
#include "bundlemw/sampling.hpp"
#include "bundlemw/estimation.hpp"
#include "bundlemw/triangle.hpp"
#include "bundlemw/contour.hpp"
#include "bundlemw/changepoint.hpp"
#include "bundlemw/io.hpp"
