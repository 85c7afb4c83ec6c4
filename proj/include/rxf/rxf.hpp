#pragma once

#include "rxf/attribution.hpp"
#include "rxf/corpus.hpp"
#include "rxf/dep_path.hpp"
#include "rxf/error.hpp"
#include "rxf/eval.hpp"
#include "rxf/explanation.hpp"
#include "rxf/keyed_config.hpp"
#include "rxf/masking.hpp"
#include "rxf/model.hpp"
#include "rxf/relation_model.hpp"
#include "rxf/rng.hpp"
#include "rxf/rule_gen.hpp"
#include "rxf/rules.hpp"
#include "rxf/synthetic.hpp"
#include "rxf/trainer.hpp"
