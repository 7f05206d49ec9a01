// Convenience umbrella: pulls in every module.
#pragma once

#include "diskrul/cli.hpp"
#include "diskrul/common.hpp"
#include "diskrul/csv.hpp"
#include "diskrul/dataset.hpp"
#include "diskrul/eval.hpp"
#include "diskrul/featsel.hpp"
#include "diskrul/ingest.hpp"
#include "diskrul/preprocess.hpp"
#include "diskrul/seqnet.hpp"
#include "diskrul/synth.hpp"
#include "diskrul/train.hpp"
