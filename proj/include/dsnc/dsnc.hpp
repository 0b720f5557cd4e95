#ifndef DSNC_DSNC_HPP
#define DSNC_DSNC_HPP

#include "dsnc/baselines.hpp"
#include "dsnc/binary_code.hpp"
#include "dsnc/data.hpp"
#include "dsnc/errors.hpp"
#include "dsnc/hamming.hpp"
#include "dsnc/linalg.hpp"
#include "dsnc/model.hpp"
#include "dsnc/parallel.hpp"
#include "dsnc/random.hpp"
#include "dsnc/regularizer.hpp"
#include "dsnc/serialize.hpp"
#include "dsnc/trainer.hpp"

#endif
