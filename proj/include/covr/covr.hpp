#pragma once

// Umbrella header.

#include "covr/attention.hpp"
#include "covr/autodiff.hpp"
#include "covr/container.hpp"
#include "covr/embedding.hpp"
#include "covr/error.hpp"
#include "covr/eval.hpp"
#include "covr/fusion.hpp"
#include "covr/grad_check.hpp"
#include "covr/hash.hpp"
#include "covr/objective.hpp"
#include "covr/optimizer.hpp"
#include "covr/retrieval.hpp"
#include "covr/samples.hpp"
#include "covr/synthetic.hpp"
#include "covr/tensor.hpp"
#include "covr/tokenizer.hpp"
#include "covr/trainer.hpp"
#include "covr/triplets.hpp"
