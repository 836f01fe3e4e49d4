#pragma once

// Umbrella header for the core library (no HTTP).

#include "medichain/amount.hpp"
#include "medichain/bytes.hpp"
#include "medichain/chain_store.hpp"
#include "medichain/chap.hpp"
#include "medichain/config.hpp"
#include "medichain/crypto.hpp"
#include "medichain/devnet.hpp"
#include "medichain/keystore.hpp"
#include "medichain/ledger.hpp"
#include "medichain/node.hpp"
#include "medichain/qr.hpp"
#include "medichain/qr_payload.hpp"
#include "medichain/sha256.hpp"
#include "medichain/state.hpp"
#include "medichain/transaction.hpp"
