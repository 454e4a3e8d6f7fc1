#pragma once

#include "ussl/core/log.hpp"
#include "ussl/core/types.hpp"
#include "ussl/eval/metrics.hpp"
#include "ussl/graph/dataset.hpp"
#include "ussl/graph/io.hpp"
#include "ussl/graph/synthetic.hpp"
#include "ussl/model/checkpoint.hpp"
#include "ussl/model/config.hpp"
#include "ussl/model/universal_model.hpp"
#include "ussl/preprocess/adjacency.hpp"
#include "ussl/preprocess/laplacian_pe.hpp"
#include "ussl/preprocess/pairsim.hpp"
#include "ussl/preprocess/prepared_graph.hpp"
#include "ussl/preprocess/tokens.hpp"
#include "ussl/train/config.hpp"
#include "ussl/train/trainer.hpp"
#include "ussl/train/run_dir.hpp"
#include "ussl/eval/report.hpp"
#include "ussl/eval/protocols.hpp"
