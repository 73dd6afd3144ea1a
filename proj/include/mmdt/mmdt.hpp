#pragma once

#include "mmdt/adversarial.hpp"
#include "mmdt/baseline.hpp"
#include "mmdt/error.hpp"
#include "mmdt/evaluate.hpp"
#include "mmdt/io.hpp"
#include "mmdt/kernel.hpp"
#include "mmdt/mixture.hpp"
#include "mmdt/random_models.hpp"
#include "mmdt/rng.hpp"
#include "mmdt/serialize.hpp"
#include "mmdt/tree.hpp"
