#pragma once

#include "odgt/cli.hpp"
#include "odgt/config.hpp"
#include "odgt/engine.hpp"
#include "odgt/experiments.hpp"
#include "odgt/geometry.hpp"
#include "odgt/metrics.hpp"
#include "odgt/network.hpp"
#include "odgt/problem.hpp"
#include "odgt/rng.hpp"
#include "odgt/trace_io.hpp"
#include "odgt/version.hpp"
