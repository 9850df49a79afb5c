#pragma once

#include "vstory/checkpoint.hpp"
#include "vstory/coherence.hpp"
#include "vstory/error.hpp"
#include "vstory/eval.hpp"
#include "vstory/feature_store.hpp"
#include "vstory/features.hpp"
#include "vstory/flow.hpp"
#include "vstory/pipeline.hpp"
#include "vstory/ranker.hpp"
#include "vstory/rnn.hpp"
#include "vstory/synthetic.hpp"
