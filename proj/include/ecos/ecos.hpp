#pragma once

#include "ecos/accountant.hpp"
#include "ecos/clustering.hpp"
#include "ecos/dataset.hpp"
#include "ecos/diversity.hpp"
#include "ecos/error.hpp"
#include "ecos/eval.hpp"
#include "ecos/messages.hpp"
#include "ecos/protocol.hpp"
#include "ecos/random.hpp"
#include "ecos/run.hpp"
#include "ecos/scoring.hpp"
