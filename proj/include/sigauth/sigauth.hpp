#pragma once

#include "sigauth/auth.hpp"
#include "sigauth/bench.hpp"
#include "sigauth/error.hpp"
#include "sigauth/eval.hpp"
#include "sigauth/features.hpp"
#include "sigauth/mapreduce.hpp"
#include "sigauth/nnet.hpp"
#include "sigauth/parallel.hpp"
#include "sigauth/pca.hpp"
#include "sigauth/pipeline.hpp"
#include "sigauth/sigdata.hpp"
#include "sigauth/training.hpp"
