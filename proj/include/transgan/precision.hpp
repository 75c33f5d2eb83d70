// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scalar type selection. Training builds use 32-bit floats; defining
// TRANSGAN_DOUBLE switches the whole library to 64-bit for gradient checks.
// Each precision lives in its own inline namespace so the two builds never
// collide at link time.

#ifdef TRANSGAN_DOUBLE
#define TRANSGAN_BEGIN_NAMESPACE \
  namespace transgan {           \
  inline namespace f64 {
#else
#define TRANSGAN_BEGIN_NAMESPACE \
  namespace transgan {           \
  inline namespace f32 {
#endif
#define TRANSGAN_END_NAMESPACE \
  }                            \
  }

TRANSGAN_BEGIN_NAMESPACE

#ifdef TRANSGAN_DOUBLE
using Real = double;
#else
using Real = float;
#endif

TRANSGAN_END_NAMESPACE
