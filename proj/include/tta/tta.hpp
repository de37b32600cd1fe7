#pragma once

#include "tta/error.hpp"

#include "tta/analysis/correlation.hpp"
#include "tta/analysis/gaussian.hpp"
#include "tta/analysis/projection.hpp"
#include "tta/corpus/features.hpp"
#include "tta/corpus/manifest.hpp"
#include "tta/corpus/vad.hpp"
#include "tta/corpus/wav.hpp"
#include "tta/corpus/word_duration.hpp"
#include "tta/engine/adaptation.hpp"
#include "tta/engine/config.hpp"
#include "tta/engine/optimizer.hpp"
#include "tta/evaluation/aggregate.hpp"
#include "tta/evaluation/delta_table.hpp"
#include "tta/evaluation/text.hpp"
#include "tta/evaluation/wer.hpp"
#include "tta/evaluation/wilcoxon.hpp"
#include "tta/model/adaptable_model.hpp"
#include "tta/model/ctc.hpp"
#include "tta/model/reference_model.hpp"
#include "tta/model/types.hpp"
#include "tta/objectives/losses.hpp"
#include "tta/synthetic/desk_corpus.hpp"
#include "tta/synthetic/desk_experiment.hpp"
#include "tta/synthetic/trainer.hpp"

#include "tta/cli/commands.hpp"
#include "tta/cli/run_dir.hpp"
