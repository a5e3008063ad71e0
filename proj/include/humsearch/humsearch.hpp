#pragma once

// Everything except the HTTP binding (humsearch/http_api.hpp), which pulls in
// cpp-httplib.

#include "humsearch/dtree.hpp"
#include "humsearch/errors.hpp"
#include "humsearch/game_service.hpp"
#include "humsearch/gp.hpp"
#include "humsearch/lp.hpp"
#include "humsearch/pipeline.hpp"
#include "humsearch/rationality.hpp"
#include "humsearch/records.hpp"
#include "humsearch/signatures.hpp"
#include "humsearch/testbed.hpp"
#include "humsearch/wasserstein.hpp"
